//! Shared scene preparation: segments and their adjacency.

use serde::{Deserialize, Serialize};

use crate::adjacency::{adjacent_pairs, build_grid, PairSet};
use crate::error::{Error, Result};
use crate::geometry::{LabeledCloud, Segment};
use crate::oversegment::{oversegment, remove_background, RansacConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { m: 32 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("grid.m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedScene {
    pub segments: Vec<Segment>,
    pub pairs: PairSet,
}

/// Over-segments the cloud, drops background planes and links segments
/// that share a voxel.
pub fn prepare_scene(cloud: &LabeledCloud, ransac: &RansacConfig, grid: &GridConfig) -> Result<PreparedScene> {
    let segments = remove_background(oversegment(cloud, ransac)?, cloud.len(), ransac);
    let pairs = segment_pairs(cloud, &segments, grid)?;
    Ok(PreparedScene { segments, pairs })
}

pub fn segment_pairs(cloud: &LabeledCloud, segments: &[Segment], grid: &GridConfig) -> Result<PairSet> {
    Ok(adjacent_pairs(&build_grid(cloud, segments, grid.m)?))
}
