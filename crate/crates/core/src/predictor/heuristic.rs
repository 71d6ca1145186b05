//! Hand-tuned geometric predictor used as an untrained baseline.

use serde::{Deserialize, Serialize};

use super::network::sigmoid;
use super::GroupingPredictor;
use crate::error::{Error, Result};
use crate::geometry::{aabb, sample_and_pad, segment_sample_seed, Aabb, LabeledCloud, Segment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub bias: f64,
    /// Per metre of minimum point-to-point distance.
    pub distance_weight: f64,
    /// Per metre of centroid distance.
    pub centroid_weight: f64,
    pub overlap_weight: f64,
    /// Padding added to each box before measuring overlap.
    pub box_margin: f64,
    /// Points per segment used for the distance term.
    pub max_points: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            bias: 1.0,
            distance_weight: 40.0,
            centroid_weight: 2.0,
            overlap_weight: 2.0,
            box_margin: 0.02,
            max_points: 256,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.distance_weight,
            self.centroid_weight,
            self.overlap_weight,
            self.box_margin,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || !self.bias.is_finite() || self.max_points == 0 {
            return Err(Error::InvalidConfig(format!("invalid heuristic settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct HeuristicPredictor {
    pub config: HeuristicConfig,
}

impl HeuristicPredictor {
    pub fn new(config: HeuristicConfig) -> Result<Self> {
        config.validate()?;
        Ok(HeuristicPredictor { config })
    }
}

/// Intersection volume over the smaller volume of two boxes.
fn overlap_ratio(a: &Aabb, b: &Aabb) -> f64 {
    let smaller = a.volume().min(b.volume());
    match a.intersection(b) {
        Some(i) if smaller > 0.0 => i.volume() / smaller,
        _ => 0.0,
    }
}

pub fn heuristic_predict(cfg: &HeuristicConfig, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
    let sa = sample_and_pad(cloud, a, cfg.max_points, segment_sample_seed(a))?;
    let sb = sample_and_pad(cloud, b, cfg.max_points, segment_sample_seed(b))?;
    let mut min_d2 = f64::INFINITY;
    for p in sa.valid_rows() {
        for q in sb.valid_rows() {
            let d2 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
            min_d2 = min_d2.min(d2);
        }
    }
    let centroid_gap = a.centroid(cloud).distance(b.centroid(cloud));
    let ba = aabb(cloud, Some(a.indices()))?.expanded(cfg.box_margin);
    let bb = aabb(cloud, Some(b.indices()))?.expanded(cfg.box_margin);
    let x = cfg.bias - cfg.distance_weight * min_d2.sqrt() - cfg.centroid_weight * centroid_gap
        + cfg.overlap_weight * overlap_ratio(&ba, &bb);
    Ok(sigmoid(x))
}

impl GroupingPredictor for HeuristicPredictor {
    fn predict(&self, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        heuristic_predict(&self.config, cloud, a, b)
    }
}
