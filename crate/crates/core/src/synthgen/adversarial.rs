//! Contact-pair scenes and a predictor with one over-confident cross-object
//! score, for comparing grouping with and without regret.

use rand::Rng;

use super::shapes::{Pose, ShapeKind, ShapeSpec};
use super::{on_table, SceneSpec, MAX_REJECTIONS};
use crate::adjacency::{canonical, PairSet};
use crate::error::{Error, Result};
use crate::geometry::{Label, LabeledCloud, Point3, Segment, SegmentId, BACKGROUND};
use crate::predictor::{majority_label, GroupingPredictor, OraclePredictor};

/// Box distance between the two contact objects.
pub const CONTACT_GAP: f64 = 0.015;

const BIG: ShapeKind = ShapeKind::Box {
    sx: 0.3,
    sy: 0.3,
    sz: 0.3,
};
/// Flat enough that its top face holds most of its points.
const TRAY: ShapeKind = ShapeKind::Box {
    sx: 0.25,
    sy: 0.25,
    sz: 0.04,
};

/// A large box and a flat tray side by side, `CONTACT_GAP` apart.
pub fn contact_pair_objects<R: Rng>(spec: &SceneSpec, rng: &mut R) -> Option<[ShapeSpec; 2]> {
    let (hx, hy) = (spec.table_size[0] / 2.0, spec.table_size[1] / 2.0);
    let offset = Point3::new(0.15 + CONTACT_GAP + 0.125, 0.0, 0.0);
    for _ in 0..MAX_REJECTIONS {
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let center = Point3::new(rng.random_range(-hx..=hx), rng.random_range(-hy..=hy), 0.0);
        let big = ShapeSpec {
            kind: BIG,
            pose: Pose {
                translation: center,
                yaw,
            },
            density: spec.density,
            skip_bottom: true,
        };
        let step = Pose {
            translation: Point3::ORIGIN,
            yaw,
        }
        .rotate(offset);
        let tray = ShapeSpec {
            kind: TRAY,
            pose: Pose {
                translation: center + step,
                yaw,
            },
            ..big
        };
        if on_table(spec, &big.bounds()) && on_table(spec, &tray.bounds()) {
            return Some([big, tray]);
        }
    }
    None
}

/// Adjacent pair with one segment mostly `l1` and the other mostly `l2`,
/// maximising the smaller segment size. Ties go to the smaller pair.
pub fn find_inflated_pair(
    cloud: &LabeledCloud,
    segments: &[Segment],
    pairs: &PairSet,
    l1: Label,
    l2: Label,
) -> Result<Option<(SegmentId, SegmentId)>> {
    let oracle = OraclePredictor::new(cloud)?;
    let mut best: Option<(usize, (SegmentId, SegmentId))> = None;
    for (a, b) in pairs.iter() {
        let (Some(sa), Some(sb)) = (segments.iter().find(|s| s.id == a), segments.iter().find(|s| s.id == b)) else {
            continue;
        };
        let (la, lb) = (oracle.majority_label(sa)?, oracle.majority_label(sb)?);
        if (la, lb) == (l1, l2) || (la, lb) == (l2, l1) {
            let size = sa.len().min(sb.len());
            if best.is_none_or(|(s, _)| size > s) {
                best = Some((size, (a, b)));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Scores same-object pairs `same` and others `different`, except one
/// segment-id pair which gets `inflated`. Merged segments carry fresh ids,
/// so only the original pair is ever inflated.
#[derive(Clone, Debug)]
pub struct InflatedPairPredictor {
    labels: Vec<Label>,
    pub pair: Option<(SegmentId, SegmentId)>,
    pub same: f64,
    pub different: f64,
    pub inflated: f64,
}

impl InflatedPairPredictor {
    pub fn new(cloud: &LabeledCloud, pair: Option<(SegmentId, SegmentId)>) -> Result<Self> {
        let labels = cloud
            .labels()
            .ok_or_else(|| Error::Unlabeled("inflated-pair predictor needs a labeled cloud".into()))?;
        Ok(InflatedPairPredictor {
            labels: labels.to_vec(),
            pair: pair.map(|(a, b)| canonical(a, b)),
            same: 0.9,
            different: 0.05,
            inflated: 0.95,
        })
    }
}

impl GroupingPredictor for InflatedPairPredictor {
    fn predict(&self, _cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        if self.pair == Some(canonical(a.id, b.id)) {
            return Ok(self.inflated);
        }
        let la = majority_label(&self.labels, a)?;
        let lb = majority_label(&self.labels, b)?;
        Ok(if la == lb && la != BACKGROUND {
            self.same
        } else {
            self.different
        })
    }
}
