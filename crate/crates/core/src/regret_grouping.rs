//! Iterative pair grouping with regret scores and a regret pool.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adjacency::{canonical, PairSet};
use crate::error::{Error, Result};
use crate::geometry::{LabeledCloud, Segment, SegmentId};
use crate::predictor::GroupingPredictor;

pub type Pair = (SegmentId, SegmentId);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupingConfig {
    /// Stop when the best remaining score is below this.
    pub t: f64,
    /// Regret scores above this send a pair to the pool.
    pub u: f64,
    /// Pairs considered per iteration.
    pub k: usize,
    pub regret_enabled: bool,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig {
            t: 0.75,
            u: 0.5,
            k: 3,
            regret_enabled: true,
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t) || !(0.0..=1.0).contains(&self.u) || self.k == 0 {
            return Err(Error::InvalidConfig(format!(
                "grouping needs t, u in [0, 1] and k >= 1, got t={} u={} k={}",
                self.t, self.u, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub a: SegmentId,
    pub b: SegmentId,
    pub d: SegmentId,
    pub g: f64,
    pub iteration: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Merged,
    Regretted,
    /// Already in the regret pool.
    Pooled,
    /// A segment of the pair was consumed earlier in the same iteration.
    Invalidated,
    BelowThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub a: SegmentId,
    pub b: SegmentId,
    pub g: f64,
    pub regret: Option<f64>,
    pub action: Action,
}

/// One line of the optional grouping trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub max_score: Option<f64>,
    pub candidates: Vec<CandidateTrace>,
    pub terminated: bool,
}

#[derive(Clone, Debug)]
pub struct GroupingState<'c> {
    cloud: &'c LabeledCloud,
    segments: BTreeMap<SegmentId, Segment>,
    pairs: PairSet,
    pool: BTreeSet<Pair>,
    history: Vec<MergeRecord>,
    cache: BTreeMap<Pair, f64>,
    iteration: usize,
    next_id: u32,
}

impl<'c> GroupingState<'c> {
    /// Segments must have distinct ids and disjoint indices, and every pair
    /// must reference a known segment.
    pub fn new(cloud: &'c LabeledCloud, segments: Vec<Segment>, pairs: PairSet) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for s in segments {
            cloud.check_indices(s.indices())?;
            if !s.indices().iter().all(|&i| seen.insert(i)) {
                return Err(Error::InvalidConfig(format!(
                    "segment {} overlaps another segment",
                    s.id
                )));
            }
            if let Some(dup) = map.insert(s.id, s) {
                return Err(Error::InvalidConfig(format!("duplicate segment id {}", dup.id)));
            }
        }
        if let Some(id) = pairs.ids().find(|id| !map.contains_key(id)) {
            return Err(Error::InvalidConfig(format!(
                "adjacency references unknown segment {id}"
            )));
        }
        let next_id = map.keys().next_back().map_or(0, |id: &SegmentId| id.0 + 1);
        Ok(GroupingState {
            cloud,
            segments: map,
            pairs,
            pool: BTreeSet::new(),
            history: Vec::new(),
            cache: BTreeMap::new(),
            iteration: 0,
            next_id,
        })
    }

    pub fn cloud(&self) -> &'c LabeledCloud {
        self.cloud
    }

    pub fn segments(&self) -> &BTreeMap<SegmentId, Segment> {
        &self.segments
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn pool(&self) -> &BTreeSet<Pair> {
        &self.pool
    }

    pub fn history(&self) -> &[MergeRecord] {
        &self.history
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Id the next merged segment will receive.
    pub fn next_id(&self) -> SegmentId {
        SegmentId(self.next_id)
    }

    fn segment(&self, id: SegmentId) -> Result<&Segment> {
        self.segments
            .get(&id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown segment {id}")))
    }

    /// Cached prediction for a live pair, smaller id first.
    pub fn score<P: GroupingPredictor + ?Sized>(&mut self, g: &P, a: SegmentId, b: SegmentId) -> Result<f64> {
        let key = canonical(a, b);
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = g.predict(self.cloud, self.segment(key.0)?, self.segment(key.1)?)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    fn merge(&mut self, a: SegmentId, b: SegmentId, g: f64) -> Result<MergeRecord> {
        let d = SegmentId(self.next_id);
        self.pairs.merge(a, b, d)?;
        self.next_id += 1;
        let sa = self.segments.remove(&a).expect("live segment");
        let sb = self.segments.remove(&b).expect("live segment");
        self.segments.insert(d, sa.union(&sb, d));
        let touches = |p: &Pair| p.0 == a || p.0 == b || p.1 == a || p.1 == b;
        self.pool.retain(|p| !touches(p));
        self.cache.retain(|p, _| !touches(p));
        let record = MergeRecord {
            a,
            b,
            d,
            g,
            iteration: self.iteration,
        };
        self.history.push(record.clone());
        Ok(record)
    }
}

/// `max(s1, s2)` where `s1` is the largest drop `g(V, b) - g(V, a ∪ b)`
/// over neighbors `V` of `b` other than `a`, and `s2` is the same for `a`.
/// Returns -1 when neither segment has another neighbor.
pub fn regret_score<P: GroupingPredictor + ?Sized>(
    state: &mut GroupingState,
    g: &P,
    a: SegmentId,
    b: SegmentId,
) -> Result<f64> {
    if !state.pairs.contains(a, b) {
        return Err(Error::NotAdjacent(a, b));
    }
    let union = state.segment(a)?.union(state.segment(b)?, state.next_id());
    let mut best: Option<f64> = None;
    for (side, partner) in [(b, a), (a, b)] {
        let neighbors: Vec<SegmentId> = state.pairs.neighbors(side).filter(|&v| v != partner).collect();
        for v in neighbors {
            let before = state.score(g, v, side)?;
            let after = g.predict(state.cloud, state.segment(v)?, &union)?;
            let diff = before - after;
            best = Some(best.map_or(diff, |s| s.max(diff)));
        }
    }
    Ok(best.unwrap_or(-1.0))
}

/// Pure form of the regret test: regret a grouping of `a` and `b` when a
/// neighbor `c` is much more likely to belong with `b` than with `a ∪ b`.
pub fn verify_regret_logic(_g_ab: f64, g_cb: f64, g_cd: f64, u: f64) -> bool {
    g_cb - g_cd > u
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// At most `k` scored pairs, best first.
    pub candidates: Vec<(Pair, f64)>,
    /// Best score among pairs outside the regret pool.
    pub max_score: Option<f64>,
}

/// Scores every adjacent pair outside the regret pool and returns the top
/// `k` by score, ties broken by ascending pair.
pub fn select_candidates<P: GroupingPredictor + ?Sized>(
    state: &mut GroupingState,
    g: &P,
    cfg: &GroupingConfig,
) -> Result<Selection> {
    let open: Vec<Pair> = state.pairs.iter().filter(|p| !state.pool.contains(p)).collect();
    let mut scored = Vec::with_capacity(open.len());
    for (a, b) in open {
        scored.push(((a, b), state.score(g, a, b)?));
    }
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let max_score = scored.first().map(|c| c.1);
    scored.truncate(cfg.k);
    Ok(Selection {
        candidates: scored,
        max_score,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub merged: Vec<MergeRecord>,
    pub regretted: Vec<Pair>,
    pub terminated: bool,
    pub trace: TraceRecord,
}

/// One loop iteration. Candidates scoring below `t` are never merged.
pub fn grouping_step<P: GroupingPredictor + ?Sized>(
    state: &mut GroupingState,
    g: &P,
    cfg: &GroupingConfig,
) -> Result<StepOutcome> {
    let selection = select_candidates(state, g, cfg)?;
    let mut trace = TraceRecord {
        iteration: state.iteration,
        max_score: selection.max_score,
        candidates: Vec::new(),
        terminated: false,
    };
    if selection.max_score.is_none_or(|m| m < cfg.t) {
        trace.terminated = true;
        return Ok(StepOutcome {
            merged: Vec::new(),
            regretted: Vec::new(),
            terminated: true,
            trace,
        });
    }
    let mut merged = Vec::new();
    let mut regretted = Vec::new();
    for ((a, b), score) in selection.candidates {
        let mut regret = None;
        let action = if score < cfg.t {
            Action::BelowThreshold
        } else if !state.segments.contains_key(&a) || !state.segments.contains_key(&b) {
            Action::Invalidated
        } else if state.pool.contains(&(a, b)) {
            Action::Pooled
        } else {
            let s = if cfg.regret_enabled {
                Some(regret_score(state, g, a, b)?)
            } else {
                None
            };
            regret = s;
            if s.is_some_and(|s| s > cfg.u) {
                state.pool.insert((a, b));
                regretted.push((a, b));
                Action::Regretted
            } else {
                merged.push(state.merge(a, b, score)?);
                Action::Merged
            }
        };
        trace.candidates.push(CandidateTrace {
            a,
            b,
            g: score,
            regret,
            action,
        });
    }
    state.iteration += 1;
    Ok(StepOutcome {
        merged,
        regretted,
        terminated: false,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub segment: Segment,
    /// Mean `g` over the merges that built this segment; 0 for an
    /// unmerged segment.
    pub score: f64,
    pub merges: Vec<MergeRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupingOutcome {
    /// Ranked by score, then by id.
    pub proposals: Vec<Proposal>,
    pub history: Vec<MergeRecord>,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
}

pub fn run_grouping<P: GroupingPredictor + ?Sized>(
    cloud: &LabeledCloud,
    segments: Vec<Segment>,
    pairs: PairSet,
    g: &P,
    cfg: &GroupingConfig,
) -> Result<GroupingOutcome> {
    cfg.validate()?;
    let n = segments.len();
    let bound = n + n * n.saturating_sub(1) / 2;
    let covered: usize = segments.iter().map(Segment::len).sum();
    let mut state = GroupingState::new(cloud, segments, pairs)?;
    let mut trace = Vec::new();
    loop {
        let step = grouping_step(&mut state, g, cfg)?;
        let done = step.terminated;
        trace.push(step.trace);
        if done {
            break;
        }
        if state.iteration > bound {
            return Err(Error::Degenerate(format!("grouping exceeded {bound} iterations")));
        }
    }
    debug_assert_eq!(state.segments.values().map(Segment::len).sum::<usize>(), covered);
    Ok(GroupingOutcome {
        proposals: proposals(&state),
        history: state.history.clone(),
        trace,
        iterations: state.iteration,
    })
}

/// Live segments as ranked proposals.
pub fn proposals(state: &GroupingState) -> Vec<Proposal> {
    let by_result: BTreeMap<SegmentId, &MergeRecord> = state.history.iter().map(|m| (m.d, m)).collect();
    let mut out: Vec<Proposal> = state
        .segments
        .values()
        .map(|seg| {
            let mut merges = Vec::new();
            let mut stack = vec![seg.id];
            while let Some(id) = stack.pop() {
                if let Some(m) = by_result.get(&id) {
                    merges.push((*m).clone());
                    stack.push(m.a);
                    stack.push(m.b);
                }
            }
            merges.sort_by_key(|m| m.d);
            let score = if merges.is_empty() {
                0.0
            } else {
                merges.iter().map(|m| m.g).sum::<f64>() / merges.len() as f64
            };
            Proposal {
                segment: seg.clone(),
                score,
                merges,
            }
        })
        .collect();
    out.sort_by(|x, y| y.score.total_cmp(&x.score).then(x.segment.id.cmp(&y.segment.id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::predictor::FnPredictor;
    use proptest::prelude::*;

    fn id(n: u32) -> SegmentId {
        SegmentId(n)
    }

    /// `count` singleton segments over a line cloud.
    fn singletons(count: usize) -> (LabeledCloud, Vec<Segment>) {
        let pts = (0..count).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = LabeledCloud::unlabeled(pts).unwrap();
        let segs = (0..count).map(|i| Segment::new(id(i as u32), [i]).unwrap()).collect();
        (cloud, segs)
    }

    fn pairs(edges: &[(u32, u32)]) -> PairSet {
        edges.iter().map(|&(a, b)| (id(a), id(b))).collect()
    }

    /// Table-driven predictor keyed by segment ids.
    fn table(entries: &[((u32, u32), f64)], default: f64) -> impl Fn(&Segment, &Segment) -> f64 {
        let map: BTreeMap<(u32, u32), f64> = entries.iter().copied().collect();
        move |a, b| *map.get(&(a.id.0, b.id.0)).unwrap_or(&default)
    }

    #[test]
    fn regret_score_worked_example() {
        // A=0, B=1, C=2; the union of A and B will be 3
        let (cloud, segs) = singletons(3);
        let g = FnPredictor(table(&[((0, 1), 0.9), ((1, 2), 0.9), ((2, 3), 0.2)], 0.0));
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(0, 1), (1, 2)])).unwrap();
        let s = regret_score(&mut st, &g, id(0), id(1)).unwrap();
        assert!((s - 0.7).abs() < 1e-12);
        assert!(s > 0.5);
        let step = grouping_step(
            &mut st,
            &g,
            &GroupingConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(step.regretted, vec![(id(0), id(1))]);
        assert!(step.merged.is_empty());
    }

    #[test]
    fn regret_score_zero_and_isolated() {
        let (cloud, segs) = singletons(4);
        let g = FnPredictor(|_: &Segment, _: &Segment| 0.4);
        let mut st = GroupingState::new(&cloud, segs.clone(), pairs(&[(0, 1), (1, 2), (0, 3)])).unwrap();
        assert_eq!(regret_score(&mut st, &g, id(0), id(1)).unwrap(), 0.0);
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(0, 1)])).unwrap();
        assert_eq!(regret_score(&mut st, &g, id(0), id(1)).unwrap(), -1.0);
        assert!(matches!(
            regret_score(&mut st, &g, id(0), id(2)),
            Err(Error::NotAdjacent(..))
        ));
    }

    #[test]
    fn regret_logic_helper() {
        assert!(verify_regret_logic(0.9, 1.0, 0.0, 0.5));
        assert!(verify_regret_logic(0.9, 0.9, 0.2, 0.5));
        assert!(!verify_regret_logic(0.9, 0.5, 0.5, 0.5));
    }

    #[test]
    fn select_top_k_with_ties() {
        let (cloud, segs) = singletons(6);
        let g = FnPredictor(table(
            &[
                ((0, 1), 0.1),
                ((1, 2), 0.5),
                ((2, 3), 0.9),
                ((3, 4), 0.7),
                ((4, 5), 0.3),
            ],
            0.0,
        ));
        let mut st =
            GroupingState::new(&cloud, segs.clone(), pairs(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])).unwrap();
        let sel = select_candidates(&mut st, &g, &GroupingConfig::default()).unwrap();
        let got: Vec<Pair> = sel.candidates.iter().map(|c| c.0).collect();
        assert_eq!(got, vec![(id(2), id(3)), (id(3), id(4)), (id(1), id(2))]);
        assert_eq!(sel.max_score, Some(0.9));

        let g = FnPredictor(|_: &Segment, _: &Segment| 0.8);
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(4, 5), (0, 1)])).unwrap();
        let sel = select_candidates(
            &mut st,
            &g,
            &GroupingConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sel.candidates[0].0, (id(0), id(1)));
    }

    #[test]
    fn pool_members_are_excluded() {
        let (cloud, segs) = singletons(3);
        let g = FnPredictor(table(
            &[((0, 1), 0.9), ((1, 2), 0.9), ((2, 3), 0.0), ((0, 3), 0.0)],
            0.0,
        ));
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(0, 1), (1, 2)])).unwrap();
        let cfg = GroupingConfig::default();
        let step = grouping_step(&mut st, &g, &cfg).unwrap();
        assert_eq!(step.regretted.len(), 2);
        let sel = select_candidates(&mut st, &g, &cfg).unwrap();
        assert!(sel.candidates.is_empty());
        assert_eq!(sel.max_score, None);
        assert!(grouping_step(&mut st, &g, &cfg).unwrap().terminated);
    }

    #[test]
    fn step_examples() {
        let (cloud, segs) = singletons(3);
        let cfg = GroupingConfig {
            k: 1,
            ..Default::default()
        };
        // low regret: merged
        let g = FnPredictor(table(&[((0, 1), 0.9), ((1, 2), 0.3), ((2, 3), 0.1)], 0.0));
        let mut st = GroupingState::new(&cloud, segs.clone(), pairs(&[(0, 1), (1, 2)])).unwrap();
        let step = grouping_step(&mut st, &g, &cfg).unwrap();
        assert_eq!(step.merged.len(), 1);
        assert_eq!(step.merged[0].d, id(3));
        assert_eq!(st.pairs().iter().collect::<Vec<_>>(), vec![(id(2), id(3))]);
        // below threshold: nothing happens
        let g = FnPredictor(|_: &Segment, _: &Segment| 0.6);
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(0, 1), (1, 2)])).unwrap();
        let step = grouping_step(&mut st, &g, &cfg).unwrap();
        assert!(step.terminated);
        assert_eq!(st.iteration(), 0);
        assert_eq!(st.segments().len(), 3);
    }

    #[test]
    fn later_candidate_sharing_a_segment_is_skipped() {
        let (cloud, segs) = singletons(3);
        let g = FnPredictor(|_: &Segment, _: &Segment| 0.9);
        let cfg = GroupingConfig {
            regret_enabled: false,
            ..Default::default()
        };
        let mut st = GroupingState::new(&cloud, segs, pairs(&[(0, 1), (1, 2)])).unwrap();
        let step = grouping_step(&mut st, &g, &cfg).unwrap();
        assert_eq!(step.merged.len(), 1);
        assert_eq!(step.trace.candidates[1].action, Action::Invalidated);
    }

    #[test]
    fn constant_zero_keeps_initial_segments() {
        let (cloud, segs) = singletons(5);
        let g = FnPredictor(|_: &Segment, _: &Segment| 0.0);
        let out = run_grouping(
            &cloud,
            segs,
            pairs(&[(0, 1), (1, 2), (3, 4)]),
            &g,
            &GroupingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.proposals.len(), 5);
        assert!(out.history.is_empty());
        assert!(out.proposals.iter().all(|p| p.score == 0.0));
    }

    #[test]
    fn proposal_scores_average_their_merges() {
        let (cloud, segs) = singletons(3);
        let g = FnPredictor(table(&[((0, 1), 0.8), ((2, 3), 1.0)], 0.0));
        let cfg = GroupingConfig {
            regret_enabled: false,
            k: 1,
            ..Default::default()
        };
        let out = run_grouping(&cloud, segs, pairs(&[(0, 1), (1, 2)]), &g, &cfg).unwrap();
        assert_eq!(out.proposals.len(), 1);
        assert_eq!(out.proposals[0].segment.indices(), &[0, 1, 2]);
        assert!((out.proposals[0].score - 0.9).abs() < 1e-12);
        assert_eq!(out.proposals[0].merges.len(), 2);
    }

    fn hash_score(a: &Segment, b: &Segment, salt: u64) -> f64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ salt;
        for &i in a.indices().iter().chain(&[usize::MAX]).chain(b.indices()) {
            h ^= i as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
            h ^= h >> 29;
        }
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn components(n: usize, edges: &BTreeSet<(u32, u32)>) -> BTreeSet<Vec<usize>> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for &(a, b) in edges {
            let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
            parent[ra] = rb;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    proptest! {
        #[test]
        fn constant_one_without_regret_gives_components(
            n in 1usize..12,
            raw in prop::collection::btree_set((0u32..12, 0u32..12), 0..20),
            k in 1usize..4,
        ) {
            let edges: BTreeSet<(u32, u32)> = raw.into_iter()
                .filter(|&(a, b)| a != b && (a as usize) < n && (b as usize) < n)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            let (cloud, segs) = singletons(n);
            let g = FnPredictor(|_: &Segment, _: &Segment| 1.0);
            let cfg = GroupingConfig { regret_enabled: false, k, ..Default::default() };
            let ps: PairSet = edges.iter().map(|&(a, b)| (id(a), id(b))).collect();
            let out = run_grouping(&cloud, segs, ps, &g, &cfg).unwrap();
            let got: BTreeSet<Vec<usize>> = out.proposals.iter().map(|p| p.segment.indices().to_vec()).collect();
            prop_assert_eq!(got, components(n, &edges));
        }

        #[test]
        fn random_runs_conserve_partition(
            n in 2usize..14,
            raw in prop::collection::btree_set((0u32..14, 0u32..14), 1..30),
            salt in any::<u64>(),
            k in 1usize..4,
            regret in any::<bool>(),
        ) {
            let edges: Vec<(SegmentId, SegmentId)> = raw.into_iter()
                .filter(|&(a, b)| a != b && (a as usize) < n && (b as usize) < n)
                .map(|(a, b)| (id(a), id(b)))
                .collect();
            let (cloud, segs) = singletons(n);
            let g = FnPredictor(move |a: &Segment, b: &Segment| hash_score(a, b, salt));
            let cfg = GroupingConfig { t: 0.3, k, regret_enabled: regret, ..Default::default() };
            let out = run_grouping(&cloud, segs, edges.into_iter().collect(), &g, &cfg).unwrap();
            let mut all: Vec<usize> = out.proposals.iter().flat_map(|p| p.segment.indices().to_vec()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(out.iterations <= n + n * (n - 1) / 2);
            prop_assert!(out.history.iter().all(|m| m.g >= cfg.t));
        }
    }
}
