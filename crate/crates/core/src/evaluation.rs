//! Recall of object proposals against labeled ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aabb, format_real, intersection_len, Aabb, Label, LabeledCloud, BACKGROUND};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    #[default]
    PointSet,
    Aabb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_mode: IouMode,
    pub iou_grid: Vec<f64>,
    pub budget_grid: Vec<usize>,
    pub fixed_iou: f64,
    pub min_object_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_mode: IouMode::PointSet,
            iou_grid: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            budget_grid: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            fixed_iou: 0.5,
            min_object_points: 20,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if self.iou_grid.is_empty() || !self.iou_grid.iter().all(in_unit) || !self.iou_grid.is_sorted() {
            return Err(Error::InvalidConfig(
                "eval.iou_grid must be non-empty, sorted, within [0, 1]".into(),
            ));
        }
        if self.budget_grid.is_empty() || !self.budget_grid.is_sorted() {
            return Err(Error::InvalidConfig(
                "eval.budget_grid must be non-empty and sorted".into(),
            ));
        }
        if !in_unit(&self.fixed_iou) {
            return Err(Error::InvalidConfig("eval.fixed_iou must be within [0, 1]".into()));
        }
        Ok(())
    }
}

/// `|p ∩ g| / |p ∪ g|` over sorted, deduplicated index sets.
pub fn point_set_iou(p: &[usize], g: &[usize]) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::EmptySelection);
    }
    let inter = intersection_len(p, g);
    Ok(inter as f64 / (p.len() + g.len() - inter) as f64)
}

/// Box IoU; zero-volume boxes score 1 when identical and 0 otherwise.
pub fn aabb_iou(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| i.volume());
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    inter / union
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub label: Label,
    pub indices: Vec<usize>,
}

/// One object per non-background label with at least `min_points` points.
pub fn ground_truth_objects(cloud: &LabeledCloud, min_points: usize) -> Result<Vec<GroundTruth>> {
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::Unlabeled("evaluation needs a labeled cloud".into()))?;
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != BACKGROUND {
            groups.entry(l).or_default().push(i);
        }
    }
    Ok(groups
        .into_iter()
        .filter(|(_, v)| v.len() >= min_points.max(1))
        .map(|(label, indices)| GroundTruth { label, indices })
        .collect())
}

/// IoU of every ranked proposal against every ground-truth object of one
/// scene.
#[derive(Clone, Debug, PartialEq)]
pub struct IouTable {
    pub proposal_ids: Vec<u32>,
    pub objects: Vec<Label>,
    /// `iou[p][o]`.
    pub iou: Vec<Vec<f64>>,
}

impl IouTable {
    /// `proposals` are `(id, sorted indices)` in rank order.
    pub fn new(
        cloud: &LabeledCloud,
        proposals: &[(u32, Vec<usize>)],
        gts: &[GroundTruth],
        mode: IouMode,
    ) -> Result<Self> {
        let mut iou = Vec::with_capacity(proposals.len());
        match mode {
            IouMode::PointSet => {
                let mut owner = vec![usize::MAX; cloud.len()];
                for (o, gt) in gts.iter().enumerate() {
                    cloud.check_indices(&gt.indices)?;
                    for &i in &gt.indices {
                        owner[i] = o;
                    }
                }
                for (_, p) in proposals {
                    cloud.check_indices(p)?;
                    let mut inter = vec![0usize; gts.len()];
                    for &i in p {
                        if let Some(c) = inter.get_mut(owner[i]) {
                            *c += 1;
                        }
                    }
                    let row = gts
                        .iter()
                        .zip(inter)
                        .map(|(g, n)| n as f64 / (p.len() + g.indices.len() - n) as f64)
                        .collect();
                    iou.push(row);
                }
            }
            IouMode::Aabb => {
                let boxes: Vec<Aabb> = gts
                    .iter()
                    .map(|g| aabb(cloud, Some(&g.indices)))
                    .collect::<Result<_>>()?;
                for (_, p) in proposals {
                    let pb = aabb(cloud, Some(p))?;
                    iou.push(boxes.iter().map(|b| aabb_iou(&pb, b)).collect());
                }
            }
        }
        Ok(IouTable {
            proposal_ids: proposals.iter().map(|p| p.0).collect(),
            objects: gts.iter().map(|g| g.label).collect(),
            iou,
        })
    }

    /// Best IoU per object over the top `budget` proposals, with the id of
    /// the proposal reaching it.
    pub fn best(&self, budget: Option<usize>) -> Vec<(f64, Option<u32>)> {
        let take = budget.unwrap_or(usize::MAX).min(self.iou.len());
        (0..self.objects.len())
            .map(|o| {
                let mut best = (0.0, None);
                for (p, row) in self.iou[..take].iter().enumerate() {
                    if row[o] > best.0 {
                        best = (row[o], Some(self.proposal_ids[p]));
                    }
                }
                best
            })
            .collect()
    }

    pub fn detected(&self, threshold: f64, budget: Option<usize>) -> usize {
        self.best(budget)
            .iter()
            .filter(|(v, id)| id.is_some() && *v >= threshold)
            .count()
    }

    pub fn recall(&self, threshold: f64, budget: Option<usize>) -> Result<f64> {
        if self.objects.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(self.detected(threshold, budget) as f64 / self.objects.len() as f64)
    }
}

/// Fraction of objects matched by some proposal among the top `budget`.
pub fn recall_at(
    cloud: &LabeledCloud,
    proposals: &[(u32, Vec<usize>)],
    gts: &[GroundTruth],
    mode: IouMode,
    iou_threshold: f64,
    budget: Option<usize>,
) -> Result<f64> {
    IouTable::new(cloud, proposals, gts, mode)?.recall(iou_threshold, budget)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectRow {
    pub scene: String,
    pub object: Label,
    pub best_iou: f64,
    pub best_proposal: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub objects: Vec<ObjectRow>,
    pub iou_curve: Vec<(f64, f64)>,
    pub budget_curve: Vec<(usize, f64)>,
}

/// Pools detections over scenes: recall is detected objects over all
/// objects.
pub fn recall_curves(scenes: &[(String, IouTable)], cfg: &EvalConfig) -> Result<EvalReport> {
    let total: usize = scenes.iter().map(|(_, t)| t.objects.len()).sum();
    if total == 0 {
        return Err(Error::EmptySelection);
    }
    let pooled = |threshold: f64, budget: Option<usize>| {
        scenes.iter().map(|(_, t)| t.detected(threshold, budget)).sum::<usize>() as f64 / total as f64
    };
    let mut objects = Vec::new();
    for (scene, table) in scenes {
        for (&object, (best_iou, best_proposal)) in table.objects.iter().zip(table.best(None)) {
            objects.push(ObjectRow {
                scene: scene.clone(),
                object,
                best_iou,
                best_proposal,
            });
        }
    }
    Ok(EvalReport {
        objects,
        iou_curve: cfg.iou_grid.iter().map(|&t| (t, pooled(t, None))).collect(),
        budget_curve: cfg
            .budget_grid
            .iter()
            .map(|&b| (b, pooled(cfg.fixed_iou, Some(b))))
            .collect(),
    })
}

pub const OBJECTS_CSV: &str = "objects.csv";
pub const IOU_CURVE_CSV: &str = "recall_iou.csv";
pub const BUDGET_CURVE_CSV: &str = "recall_budget.csv";

impl EvalReport {
    pub fn objects_csv(&self) -> String {
        let mut out = String::from("scene,object,best_iou,best_proposal\n");
        for r in &self.objects {
            let best = r.best_proposal.map_or(String::new(), |p| p.to_string());
            let _ = writeln!(out, "{},{},{},{}", r.scene, r.object, format_real(r.best_iou), best);
        }
        out
    }

    pub fn iou_curve_csv(&self) -> String {
        let mut out = String::from("iou_threshold,recall\n");
        for &(t, r) in &self.iou_curve {
            let _ = writeln!(out, "{},{}", format_real(t), format_real(r));
        }
        out
    }

    pub fn budget_curve_csv(&self) -> String {
        let mut out = String::from("budget,recall\n");
        for &(b, r) in &self.budget_curve {
            let _ = writeln!(out, "{},{}", b, format_real(r));
        }
        out
    }

    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            (OBJECTS_CSV, self.objects_csv()),
            (IOU_CURVE_CSV, self.iou_curve_csv()),
            (BUDGET_CURVE_CSV, self.budget_curve_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use proptest::prelude::*;

    fn cube(x: f64) -> Aabb {
        Aabb::new(Point3::new(x, 0.0, 0.0), Point3::new(x + 1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn point_iou_examples() {
        let g: Vec<usize> = (0..50).collect();
        let p: Vec<usize> = (0..60).collect();
        assert_eq!(point_set_iou(&g, &g).unwrap(), 1.0);
        assert_eq!(point_set_iou(&[100, 101], &g).unwrap(), 0.0);
        assert!((point_set_iou(&p, &g).unwrap() - 50.0 / 60.0).abs() < 1e-15);
        assert!(point_set_iou(&p, &[]).is_err());
    }

    #[test]
    fn box_iou_examples() {
        assert_eq!(aabb_iou(&cube(0.0), &cube(0.0)), 1.0);
        assert_eq!(aabb_iou(&cube(0.0), &cube(3.0)), 0.0);
        assert!((aabb_iou(&cube(0.0), &cube(0.5)) - 0.5 / 1.5).abs() < 1e-12);
        let flat = Aabb::new(Point3::ORIGIN, Point3::new(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(aabb_iou(&flat, &flat), 1.0);
        assert_eq!(aabb_iou(&flat, &cube(0.0)), 0.0);
    }

    fn scene() -> (LabeledCloud, Vec<GroundTruth>) {
        let labels: Vec<Label> = (0..100).map(|i| (i / 25) as Label).collect();
        let pts = (0..100)
            .map(|i| Point3::new(i as f64, (i % 3) as f64, (i % 7) as f64))
            .collect();
        let cloud = LabeledCloud::new(pts, Some(labels)).unwrap();
        let gts = ground_truth_objects(&cloud, 20).unwrap();
        (cloud, gts)
    }

    #[test]
    fn ground_truth_skips_background_and_small_objects() {
        let (cloud, gts) = scene();
        assert_eq!(gts.iter().map(|g| g.label).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(ground_truth_objects(&cloud, 26).unwrap().is_empty());
        let bare = LabeledCloud::unlabeled(vec![Point3::ORIGIN]).unwrap();
        assert!(matches!(ground_truth_objects(&bare, 1), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn recall_examples() {
        let (cloud, gts) = scene();
        let perfect: Vec<(u32, Vec<usize>)> = gts.iter().map(|g| (g.label, g.indices.clone())).collect();
        for mode in [IouMode::PointSet, IouMode::Aabb] {
            assert_eq!(recall_at(&cloud, &perfect, &gts, mode, 1.0, None).unwrap(), 1.0);
        }
        assert_eq!(recall_at(&cloud, &[], &gts, IouMode::PointSet, 0.5, None).unwrap(), 0.0);
        let two = &gts[..2];
        let partial = vec![(7, gts[0].indices[..23].to_vec())];
        let r = recall_at(&cloud, &partial, two, IouMode::PointSet, 0.5, None).unwrap();
        assert_eq!(r, 0.5);
        assert!(recall_at(&cloud, &partial, &[], IouMode::PointSet, 0.5, None).is_err());
    }

    #[test]
    fn curves_and_csv() {
        let (cloud, gts) = scene();
        let perfect: Vec<(u32, Vec<usize>)> = gts.iter().map(|g| (g.label + 10, g.indices.clone())).collect();
        let table = IouTable::new(&cloud, &perfect, &gts, IouMode::PointSet).unwrap();
        let cfg = EvalConfig {
            budget_grid: vec![0, 1, 3],
            ..Default::default()
        };
        let rep = recall_curves(&[("s0".into(), table)], &cfg).unwrap();
        assert!(rep.iou_curve.iter().all(|&(_, r)| r == 1.0));
        assert_eq!(rep.budget_curve[0].1, 0.0);
        assert!((rep.budget_curve[1].1 - 1.0 / 3.0).abs() < 1e-12);
        assert!(rep
            .objects_csv()
            .starts_with("scene,object,best_iou,best_proposal\ns0,1,1,11\n"));
        assert!(rep.iou_curve_csv().starts_with("iou_threshold,recall\n0.5,1\n"));
        assert!(rep
            .budget_curve_csv()
            .starts_with("budget,recall\n0,0\n1,0.333333333\n"));
    }

    #[test]
    fn default_grid() {
        let g = EvalConfig::default().iou_grid;
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
    }

    proptest! {
        #[test]
        fn point_iou_matches_set_oracle(
            a in prop::collection::btree_set(0usize..60, 0..40),
            b in prop::collection::btree_set(0usize..60, 1..40),
        ) {
            let av: Vec<usize> = a.iter().copied().collect();
            let bv: Vec<usize> = b.iter().copied().collect();
            let inter = a.intersection(&b).count() as f64;
            let union = a.union(&b).count() as f64;
            let v = point_set_iou(&av, &bv).unwrap();
            prop_assert_eq!(v, inter / union);
            if !av.is_empty() {
                prop_assert_eq!(v, point_set_iou(&bv, &av).unwrap());
            }
            prop_assert_eq!(v == 1.0, a == b);
        }

        #[test]
        fn recall_monotone(
            parts in prop::collection::vec(prop::collection::btree_set(0usize..100, 1..50), 0..8),
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, b1 in 0usize..8, b2 in 0usize..8,
        ) {
            let (cloud, gts) = scene();
            let props: Vec<(u32, Vec<usize>)> = parts.iter().enumerate()
                .map(|(i, s)| (i as u32, s.iter().copied().collect()))
                .collect();
            let table = IouTable::new(&cloud, &props, &gts, IouMode::PointSet).unwrap();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(table.recall(hi, None).unwrap() <= table.recall(lo, None).unwrap());
            let (small, big) = (b1.min(b2), b1.max(b2));
            prop_assert!(table.recall(0.5, Some(small)).unwrap() <= table.recall(0.5, Some(big)).unwrap());
            // table agrees with the direct set computation
            for (p, (_, idx)) in props.iter().enumerate() {
                for (o, g) in gts.iter().enumerate() {
                    prop_assert_eq!(table.iou[p][o], point_set_iou(idx, &g.indices).unwrap());
                }
            }
        }
    }
}
