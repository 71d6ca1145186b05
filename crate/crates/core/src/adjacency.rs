//! Shared-voxel adjacency between segments.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::geometry::{aabb, Aabb, LabeledCloud, Point3, Segment, SegmentId};

/// Bounds margin so points on the cloud's hull are never excluded.
pub const GRID_MARGIN: f64 = 1e-6;

pub type Cell = [u32; 3];

/// Canonical unordered pair, smaller id first.
pub fn canonical(a: SegmentId, b: SegmentId) -> (SegmentId, SegmentId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Cell coordinate of `p` in an `m^3` grid over `bounds`.
pub fn voxel_of(p: Point3, bounds: &Aabb, m: usize) -> Result<Cell> {
    if !bounds.contains(p) {
        return Err(Error::OutOfBounds { x: p.x, y: p.y, z: p.z });
    }
    let mut cell = [0u32; 3];
    for (axis, c) in cell.iter_mut().enumerate() {
        let lo = bounds.min.axis(axis);
        let extent = bounds.max.axis(axis) - lo;
        if extent > 0.0 {
            let k = ((p.axis(axis) - lo) / extent * m as f64).floor() as usize;
            *c = k.min(m - 1) as u32;
        }
    }
    Ok(cell)
}

#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub m: usize,
    pub bounds: Aabb,
    pub cells: BTreeMap<Cell, BTreeSet<SegmentId>>,
}

/// Records, for every voxel, which segments have a point in it. The grid
/// spans the whole cloud, not just the segmented points.
pub fn build_grid(cloud: &LabeledCloud, segments: &[Segment], m: usize) -> Result<VoxelGrid> {
    if m == 0 {
        return Err(Error::InvalidConfig("grid.m must be >= 1".into()));
    }
    let bounds = aabb(cloud, None)?.expanded(GRID_MARGIN);
    let mut cells: BTreeMap<Cell, BTreeSet<SegmentId>> = BTreeMap::new();
    for seg in segments {
        cloud.check_indices(seg.indices())?;
        for p in seg.points(cloud) {
            cells.entry(voxel_of(p, &bounds, m)?).or_default().insert(seg.id);
        }
    }
    Ok(VoxelGrid { m, bounds, cells })
}

/// Symmetric, irreflexive adjacency relation over segment ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    neighbors: BTreeMap<SegmentId, BTreeSet<SegmentId>>,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` for self-pairs and pairs already present.
    pub fn insert(&mut self, a: SegmentId, b: SegmentId) -> bool {
        if a == b {
            return false;
        }
        let fresh = self.neighbors.entry(a).or_default().insert(b);
        self.neighbors.entry(b).or_default().insert(a);
        fresh
    }

    pub fn contains(&self, a: SegmentId, b: SegmentId) -> bool {
        self.neighbors.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn remove(&mut self, a: SegmentId, b: SegmentId) -> bool {
        let hit = self.neighbors.get_mut(&a).is_some_and(|n| n.remove(&b));
        if hit {
            if let Some(n) = self.neighbors.get_mut(&b) {
                n.remove(&a);
            }
            self.prune(a);
            self.prune(b);
        }
        hit
    }

    fn prune(&mut self, id: SegmentId) {
        if self.neighbors.get(&id).is_some_and(BTreeSet::is_empty) {
            self.neighbors.remove(&id);
        }
    }

    pub fn neighbors(&self, id: SegmentId) -> impl Iterator<Item = SegmentId> + '_ {
        self.neighbors.get(&id).into_iter().flatten().copied()
    }

    /// Canonical pairs in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (SegmentId, SegmentId)> + '_ {
        self.neighbors
            .iter()
            .flat_map(|(&a, ns)| ns.range(a..).filter(move |&&b| b != a).map(move |&b| (a, b)))
    }

    pub fn len(&self) -> usize {
        self.neighbors.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Ids that appear in at least one pair.
    pub fn ids(&self) -> impl Iterator<Item = SegmentId> + '_ {
        self.neighbors.keys().copied()
    }

    /// Replaces `a` and `b` with `d`: the neighbors of `d` become those of
    /// `a` and `b` minus the pair itself.
    pub fn merge(&mut self, a: SegmentId, b: SegmentId, d: SegmentId) -> Result<()> {
        if !self.contains(a, b) {
            return Err(Error::NotAdjacent(a, b));
        }
        let mut union: BTreeSet<SegmentId> = BTreeSet::new();
        for id in [a, b] {
            for n in self.neighbors.remove(&id).unwrap_or_default() {
                if let Some(back) = self.neighbors.get_mut(&n) {
                    back.remove(&id);
                }
                union.insert(n);
            }
        }
        union.remove(&a);
        union.remove(&b);
        for n in union {
            self.insert(d, n);
        }
        let stale: Vec<SegmentId> = self
            .neighbors
            .iter()
            .filter(|(_, ns)| ns.is_empty())
            .map(|(&k, _)| k)
            .collect();
        for k in stale {
            self.neighbors.remove(&k);
        }
        Ok(())
    }
}

impl FromIterator<(SegmentId, SegmentId)> for PairSet {
    fn from_iter<I: IntoIterator<Item = (SegmentId, SegmentId)>>(iter: I) -> Self {
        let mut set = PairSet::new();
        for (a, b) in iter {
            set.insert(a, b);
        }
        set
    }
}

/// Every pair of segments sharing at least one voxel.
pub fn adjacent_pairs(grid: &VoxelGrid) -> PairSet {
    let mut pairs = PairSet::new();
    for ids in grid.cells.values() {
        let ids: Vec<SegmentId> = ids.iter().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                pairs.insert(a, b);
            }
        }
    }
    pairs
}

/// Copying form of [`PairSet::merge`].
pub fn merge_adjacency(pairs: &PairSet, a: SegmentId, b: SegmentId, d: SegmentId) -> Result<PairSet> {
    let mut out = pairs.clone();
    out.merge(a, b, d)?;
    Ok(out)
}
