//! Phased curriculum training of the pair predictor.
//!
//! Each phase trains on the accumulated pair set, then merges the top-scored
//! ground-truth-positive pairs in every scene and adds the pairs around the
//! merged segments to the set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjacency::{canonical, PairSet};
use crate::error::{Error, Result};
use crate::geometry::{format_real, LabeledCloud, Segment, SegmentId, BACKGROUND};
use crate::predictor::{
    adam_step, loss_gradients, majority_label, sample_pair, AdamConfig, AdamState, GroupingPredictor, ModelPredictor,
    PairSample, PredictorModel,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Epoch cap per phase.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// A phase ends once its epoch-average BCE drops below this.
    pub t_l: f64,
    /// Pairs considered for merging per scene and phase.
    pub k: usize,
    pub seed: u64,
    pub max_phases: usize,
    /// Reweights pairs so both labels carry equal total weight.
    pub balance_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            lr: 0.001,
            weight_decay: 1e-4,
            t_l: 0.001,
            k: 3,
            seed: 0,
            max_phases: 64,
            balance_classes: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("train.{m}")));
        if self.epochs == 0 || self.batch_size == 0 || self.k == 0 || self.max_phases == 0 {
            return bad("epochs, batch_size, k and max_phases must be positive");
        }
        if !(self.t_l > 0.0 && self.t_l.is_finite()) {
            return bad("t_l must be > 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be >= 0");
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Adjacent segment pair with its ground-truth label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPair {
    pub scene: usize,
    pub a: Segment,
    pub b: Segment,
    pub label: f64,
    pub weight: f64,
}

impl LabeledPair {
    pub fn key(&self) -> (usize, SegmentId, SegmentId) {
        (self.scene, self.a.id, self.b.id)
    }
}

fn pair_label(labels: &[u32], a: &Segment, b: &Segment) -> Result<f64> {
    let (la, lb) = (majority_label(labels, a)?, majority_label(labels, b)?);
    Ok(if la == lb && la != BACKGROUND { 1.0 } else { 0.0 })
}

fn lookup(segments: &BTreeMap<SegmentId, Segment>, id: SegmentId) -> Result<&Segment> {
    segments
        .get(&id)
        .ok_or_else(|| Error::InvalidConfig(format!("adjacency references unknown segment {id}")))
}

/// One labeled pair per adjacent pair: 1 when both segments share a
/// non-background majority label, else 0.
pub fn label_pairs(
    scene: usize,
    cloud: &LabeledCloud,
    segments: &[Segment],
    pairs: &PairSet,
) -> Result<Vec<LabeledPair>> {
    let by_id: BTreeMap<SegmentId, Segment> = segments.iter().map(|s| (s.id, s.clone())).collect();
    label_pair_list(scene, cloud, &by_id, pairs.iter())
}

fn label_pair_list(
    scene: usize,
    cloud: &LabeledCloud,
    segments: &BTreeMap<SegmentId, Segment>,
    pairs: impl IntoIterator<Item = (SegmentId, SegmentId)>,
) -> Result<Vec<LabeledPair>> {
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::Unlabeled("pair labels need a labeled cloud".into()))?;
    pairs
        .into_iter()
        .map(|(a, b)| {
            let (a, b) = canonical(a, b);
            let (sa, sb) = (lookup(segments, a)?, lookup(segments, b)?);
            Ok(LabeledPair {
                scene,
                a: sa.clone(),
                b: sb.clone(),
                label: pair_label(labels, sa, sb)?,
                weight: 1.0,
            })
        })
        .collect()
}

/// Over-segmented training scene.
#[derive(Clone, Debug)]
pub struct TrainScene {
    pub cloud: LabeledCloud,
    pub segments: Vec<Segment>,
    pub pairs: PairSet,
}

/// Current grouping of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSnapshot {
    pub segments: BTreeMap<SegmentId, Segment>,
    pub pairs: PairSet,
    pub next_id: u32,
}

/// Accumulated pairs plus their network inputs. Pairs are never removed.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pairs: Vec<LabeledPair>,
    samples: Vec<PairSample>,
    keys: BTreeSet<(usize, SegmentId, SegmentId)>,
}

impl TrainingSet {
    /// Adds pairs not already present; returns how many were new.
    pub fn extend(&mut self, scenes: &[TrainScene], pairs: Vec<LabeledPair>, sample_n: usize) -> Result<usize> {
        let mut added = 0;
        for p in pairs {
            if !self.keys.insert(p.key()) {
                continue;
            }
            let cloud = &scenes
                .get(p.scene)
                .ok_or_else(|| Error::InvalidConfig(format!("pair references unknown scene {}", p.scene)))?
                .cloud;
            let (a, b) = sample_pair(cloud, &p.a, &p.b, sample_n)?;
            self.samples.push(PairSample {
                a,
                b,
                label: p.label,
                weight: p.weight,
            });
            self.pairs.push(p);
            added += 1;
        }
        Ok(added)
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn samples(&self) -> &[PairSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CurriculumState {
    /// 1-based index of the phase about to be trained.
    pub phase: usize,
    pub set: TrainingSet,
    pub snapshots: Vec<SceneSnapshot>,
}

impl CurriculumState {
    /// Phase 1: every initially adjacent pair.
    pub fn new(scenes: &[TrainScene], sample_n: usize) -> Result<Self> {
        let mut set = TrainingSet::default();
        let mut snapshots = Vec::with_capacity(scenes.len());
        for (i, scene) in scenes.iter().enumerate() {
            set.extend(
                scenes,
                label_pairs(i, &scene.cloud, &scene.segments, &scene.pairs)?,
                sample_n,
            )?;
            let segments: BTreeMap<SegmentId, Segment> = scene.segments.iter().map(|s| (s.id, s.clone())).collect();
            let next_id = segments.keys().next_back().map_or(0, |id| id.0 + 1);
            snapshots.push(SceneSnapshot {
                segments,
                pairs: scene.pairs.clone(),
                next_id,
            });
        }
        Ok(CurriculumState {
            phase: 1,
            set,
            snapshots,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFit {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub converged: bool,
}

/// Mini-batch Adam over `samples` until the epoch-average BCE is below
/// `t_l` or the epoch cap is hit. The shuffle is seeded by `cfg.seed` and
/// `phase`.
pub fn train_phase(
    model: &mut PredictorModel,
    adam: &mut AdamState,
    samples: &[PairSample],
    cfg: &TrainConfig,
    phase: usize,
) -> Result<PhaseFit> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(phase as u64);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut final_loss = f64::INFINITY;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (loss, grads) = loss_gradients(model, chunk.iter().map(|&i| &samples[i]), cfg.weight_decay)?;
            adam_step(model, &grads, adam)?;
            total += loss.bce * chunk.len() as f64;
        }
        final_loss = total / samples.len() as f64;
        if final_loss < cfg.t_l {
            return Ok(PhaseFit {
                epochs_run: epoch,
                final_loss,
                converged: true,
            });
        }
    }
    log::warn!(
        "phase {phase}: loss {final_loss} still above t_l after {} epochs",
        cfg.epochs
    );
    Ok(PhaseFit {
        epochs_run: cfg.epochs,
        final_loss,
        converged: false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Advance {
    pub merges: usize,
    /// Pairs added to the training set.
    pub added: usize,
}

/// Ranks each scene's pairs by `g`, merges the positives among the top `k`
/// and adds the pairs around the new segments to the training set.
pub fn advance_phase<G: GroupingPredictor>(
    state: &mut CurriculumState,
    scenes: &[TrainScene],
    g: &G,
    k: usize,
    sample_n: usize,
) -> Result<Advance> {
    if scenes.len() != state.snapshots.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scenes for {} snapshots",
            scenes.len(),
            state.snapshots.len()
        )));
    }
    let mut merges = 0;
    let mut fresh = Vec::new();
    for (i, (scene, snap)) in scenes.iter().zip(state.snapshots.iter_mut()).enumerate() {
        let labels = scene
            .cloud
            .labels()
            .ok_or_else(|| Error::Unlabeled("curriculum needs labeled scenes".into()))?;
        let mut ranked = Vec::with_capacity(snap.pairs.len());
        for (a, b) in snap.pairs.iter() {
            let s = g.predict(&scene.cloud, lookup(&snap.segments, a)?, lookup(&snap.segments, b)?)?;
            ranked.push((s, (a, b)));
        }
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

        let mut created = Vec::new();
        for &(_, (a, b)) in ranked.iter().take(k) {
            let (Some(sa), Some(sb)) = (snap.segments.get(&a), snap.segments.get(&b)) else {
                continue;
            };
            if pair_label(labels, sa, sb)? != 1.0 {
                continue;
            }
            let d = SegmentId(snap.next_id);
            snap.next_id += 1;
            let merged = sa.union(sb, d);
            snap.pairs.merge(a, b, d)?;
            snap.segments.remove(&a);
            snap.segments.remove(&b);
            snap.segments.insert(d, merged);
            created.push(d);
            merges += 1;
        }

        let mut touching = BTreeSet::new();
        for &d in &created {
            if snap.segments.contains_key(&d) {
                touching.extend(snap.pairs.neighbors(d).map(|c| canonical(c, d)));
            }
        }
        fresh.extend(label_pair_list(i, &scene.cloud, &snap.segments, touching)?);
    }
    let added = state.set.extend(scenes, fresh, sample_n)?;
    state.phase += 1;
    Ok(Advance { merges, added })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseLog {
    pub phase: usize,
    pub dataset_size: usize,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub merges: usize,
}

pub fn phase_log_csv(log: &[PhaseLog]) -> String {
    let mut out = String::from("phase,dataset_size,epochs_run,final_loss,merges\n");
    for r in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.phase,
            r.dataset_size,
            r.epochs_run,
            format_real(r.final_loss),
            r.merges
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct CurriculumOutcome {
    pub model: PredictorModel,
    pub log: Vec<PhaseLog>,
    pub state: CurriculumState,
}

/// Alternates training and merging, warm-starting each phase from the
/// previous parameters, until no scene merges or `max_phases` is reached.
pub fn curriculum_train(
    scenes: &[TrainScene],
    mut model: PredictorModel,
    cfg: &TrainConfig,
) -> Result<CurriculumOutcome> {
    cfg.validate()?;
    let n = model.sample_n();
    let mut state = CurriculumState::new(scenes, n)?;
    if state.set.is_empty() {
        return Err(Error::InvalidConfig("no adjacent pairs to train on".into()));
    }
    let mut adam = AdamState::new(&model, cfg.adam());
    let mut log = Vec::new();
    loop {
        let phase = state.phase;
        let dataset_size = state.set.len();
        let fit = if cfg.balance_classes {
            train_phase(&mut model, &mut adam, &balanced(state.set.samples()), cfg, phase)?
        } else {
            train_phase(&mut model, &mut adam, state.set.samples(), cfg, phase)?
        };
        let advance = advance_phase(&mut state, scenes, &ModelPredictor::new(model.clone()), cfg.k, n)?;
        log::info!(
            "phase {phase}: {dataset_size} pairs, {} epochs, loss {}, {} merges",
            fit.epochs_run,
            fit.final_loss,
            advance.merges
        );
        log.push(PhaseLog {
            phase,
            dataset_size,
            epochs_run: fit.epochs_run,
            final_loss: fit.final_loss,
            merges: advance.merges,
        });
        if advance.merges == 0 || phase >= cfg.max_phases {
            break;
        }
    }
    Ok(CurriculumOutcome { model, log, state })
}

/// Copies of `samples` with each weight scaled by `n / (2 * class size)`;
/// under unit weights both labels then sum to `n / 2`.
pub fn balanced(samples: &[PairSample]) -> Vec<PairSample> {
    let n = samples.len() as f64;
    let pos = samples.iter().filter(|s| s.label >= 0.5).count() as f64;
    let neg = n - pos;
    samples
        .iter()
        .map(|s| {
            let class = if s.label >= 0.5 { pos } else { neg };
            PairSample {
                weight: s.weight * n / (2.0 * class),
                ..s.clone()
            }
        })
        .collect()
}

/// Fraction of samples whose prediction falls on the label's side of
/// `threshold`.
pub fn pair_accuracy(model: &PredictorModel, samples: &[PairSample], threshold: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut hits = 0usize;
    for s in samples {
        let p = model.predict_pair(&s.a, &s.b)?;
        if (p >= threshold) == (s.label >= 0.5) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}
