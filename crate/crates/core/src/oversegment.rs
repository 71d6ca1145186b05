//! Over-segmentation by repeated RANSAC plane extraction, followed by removal
//! of large background planes.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LabeledCloud, Point3, Segment, SegmentId};

/// Plane `normal . p + offset = 0` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    normal: Point3,
    offset: f64,
}

impl Plane {
    /// Normalizes `normal`; fails on a zero vector.
    pub fn new(normal: Point3, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Degenerate("plane normal has zero length".into()));
        }
        Ok(Plane {
            normal: normal * (1.0 / len),
            offset: offset / len,
        })
    }

    pub fn normal(&self) -> Point3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Plane through three points, `None` when they are (nearly) collinear.
    pub fn through(a: Point3, b: Point3, c: Point3) -> Option<Plane> {
        let u = b - a;
        let v = c - a;
        let n = u.cross(v);
        let len = n.norm();
        if !(len > 1e-12 * u.norm() * v.norm()) {
            return None;
        }
        let normal = n * (1.0 / len);
        Some(Plane {
            normal,
            offset: -normal.dot(a),
        })
    }

    /// Least-squares plane: centroid plus the covariance eigenvector with the
    /// smallest eigenvalue.
    pub fn fit(points: &[Point3]) -> Option<Plane> {
        if points.len() < 3 {
            return None;
        }
        let inv = 1.0 / points.len() as f64;
        let c = points.iter().fold(Point3::ORIGIN, |acc, &p| acc + p) * inv;
        let mut cov = Matrix3::<f64>::zeros();
        for &p in points {
            let d = p - c;
            let v = nalgebra::Vector3::new(d.x, d.y, d.z);
            cov += v * v.transpose();
        }
        let eig = SymmetricEigen::new(cov * inv);
        let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        let e = eig.eigenvectors.column(k);
        let mut normal = Point3::new(e[0], e[1], e[2]);
        // fix the sign so the largest component is positive
        let dominant = (0..3)
            .max_by(|&i, &j| normal.axis(i).abs().total_cmp(&normal.axis(j).abs()))
            .unwrap_or(0);
        if normal.axis(dominant) < 0.0 {
            normal = -normal;
        }
        let len = normal.norm();
        if !(len > 0.0) {
            return None;
        }
        let normal = normal * (1.0 / len);
        Some(Plane {
            normal,
            offset: -normal.dot(c),
        })
    }
}

pub fn point_plane_distance(p: Point3, plane: &Plane) -> f64 {
    (plane.normal.dot(p) + plane.offset).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    /// Inlier distance threshold in meters.
    pub epsilon: f64,
    pub iterations: usize,
    pub min_inliers: usize,
    pub max_planes: usize,
    /// Segments larger than this fraction of the scene are background.
    pub background_fraction: f64,
    /// Plane inliers are split into spatially connected pieces at this
    /// radius; `None` keeps each plane's inliers together.
    pub cluster_radius: Option<f64>,
    /// When set, the second and third RANSAC sample points are drawn from
    /// within this distance of the first.
    pub sample_radius: Option<f64>,
    /// When set, a point is only an inlier if its estimated normal lies
    /// within this many degrees of the plane normal.
    pub normal_tolerance_deg: Option<f64>,
    /// Neighbourhood radius for normal estimation.
    pub normal_radius: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            epsilon: 0.01,
            iterations: 500,
            min_inliers: 30,
            max_planes: 64,
            background_fraction: 0.25,
            cluster_radius: Some(0.03),
            sample_radius: Some(0.1),
            normal_tolerance_deg: Some(30.0),
            normal_radius: 0.02,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("ransac.{m}")));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be > 0");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.min_inliers < 3 {
            return bad("min_inliers must be >= 3");
        }
        if !(self.background_fraction > 0.0 && self.background_fraction <= 1.0) {
            return bad("background_fraction must be in (0, 1]");
        }
        if let Some(r) = self.cluster_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("cluster_radius must be > 0");
            }
        }
        if let Some(a) = self.normal_tolerance_deg {
            if !(a > 0.0 && a <= 90.0) {
                return bad("normal_tolerance_deg must be in (0, 90]");
            }
        }
        if !(self.normal_radius > 0.0 && self.normal_radius.is_finite()) {
            return bad("normal_radius must be > 0");
        }
        if let Some(r) = self.sample_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("sample_radius must be > 0");
            }
        }
        Ok(())
    }
}

type Cell = [i64; 3];

fn cell_of(p: Point3, size: f64) -> Cell {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Positions into a candidate list, hashed by cubic cell.
struct CellIndex {
    size: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl CellIndex {
    fn new(cloud: &LabeledCloud, candidates: &[usize], size: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (k, &i) in candidates.iter().enumerate() {
            cells.entry(cell_of(cloud.point(i), size)).or_default().push(k);
        }
        CellIndex { size, cells }
    }

    /// Positions other than `k` whose points lie within `radius` of point `k`.
    /// `radius` must not exceed the cell size.
    fn within(&self, cloud: &LabeledCloud, candidates: &[usize], k: usize, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = cloud.point(candidates[k]);
        let c = cell_of(p, self.size);
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        out.extend(
                            members
                                .iter()
                                .copied()
                                .filter(|&m| m != k && p.distance_squared(cloud.point(candidates[m])) <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// Fixed-radius neighbour lists over positions in a candidate list.
struct Neighbors {
    start: Vec<usize>,
    list: Vec<usize>,
}

impl Neighbors {
    fn new(cloud: &LabeledCloud, candidates: &[usize], radius: f64) -> Self {
        let cells = CellIndex::new(cloud, candidates, radius);
        let mut start = Vec::with_capacity(candidates.len() + 1);
        let mut list = Vec::new();
        let mut near = Vec::new();
        start.push(0);
        for k in 0..candidates.len() {
            cells.within(cloud, candidates, k, radius, &mut near);
            list.extend_from_slice(&near);
            start.push(list.len());
        }
        Neighbors { start, list }
    }

    fn of(&self, k: usize) -> &[usize] {
        &self.list[self.start[k]..self.start[k + 1]]
    }
}

/// Per-point normals from a least-squares plane through each point's
/// neighbours within `radius`. `None` where fewer than three points are in
/// reach or the neighbourhood is degenerate.
pub fn estimate_normals(cloud: &LabeledCloud, radius: f64) -> Vec<Option<Point3>> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    let cells = CellIndex::new(cloud, &all, radius);
    let mut near = Vec::new();
    (0..cloud.len())
        .map(|i| {
            cells.within(cloud, &all, i, radius, &mut near);
            if near.len() < 2 {
                return None;
            }
            let mut pts: Vec<Point3> = near.iter().map(|&k| cloud.point(k)).collect();
            pts.push(cloud.point(i));
            surface_normal(&pts)
        })
        .collect()
}

/// Smallest-variance direction of `points`, or `None` when they do not
/// spread along two directions.
fn surface_normal(points: &[Point3]) -> Option<Point3> {
    let inv = 1.0 / points.len() as f64;
    let c = points.iter().fold(Point3::ORIGIN, |acc, &p| acc + p) * inv;
    let mut cov = Matrix3::<f64>::zeros();
    for &p in points {
        let d = p - c;
        let v = nalgebra::Vector3::new(d.x, d.y, d.z);
        cov += v * v.transpose();
    }
    let eig = SymmetricEigen::new(cov * inv);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(mid > 1e-3 * max) {
        return None;
    }
    let e = eig.eigenvectors.column(order[0]);
    Some(Point3::new(e[0], e[1], e[2]))
}

/// Distance test plus an optional normal-agreement test.
struct InlierTest<'a> {
    eps: f64,
    normals: Option<(&'a [Option<Point3>], f64)>,
}

impl<'a> InlierTest<'a> {
    fn new(cfg: &RansacConfig, normals: Option<&'a [Option<Point3>]>) -> Self {
        InlierTest {
            eps: cfg.epsilon,
            normals: normals.zip(cfg.normal_tolerance_deg.map(|d| d.to_radians().cos())),
        }
    }

    fn accepts(&self, cloud: &LabeledCloud, i: usize, plane: &Plane) -> bool {
        if point_plane_distance(cloud.point(i), plane) > self.eps {
            return false;
        }
        match self.normals {
            Some((normals, min_cos)) => normals[i].is_none_or(|n| n.dot(plane.normal).abs() >= min_cos),
            None => true,
        }
    }

    fn inliers(&self, cloud: &LabeledCloud, candidates: &[usize], plane: &Plane) -> Vec<usize> {
        candidates
            .iter()
            .copied()
            .filter(|&i| self.accepts(cloud, i, plane))
            .collect()
    }
}

/// Plane inliers reachable from position `seed` through chains of
/// neighbouring inliers. `mark` must hold no value equal to `stamp`.
#[allow(clippy::too_many_arguments)]
fn connected_support(
    cloud: &LabeledCloud,
    candidates: &[usize],
    neighbors: &Neighbors,
    seed: usize,
    plane: &Plane,
    test: &InlierTest,
    mark: &mut [usize],
    stamp: usize,
) -> usize {
    let is_inlier = |k: usize| test.accepts(cloud, candidates[k], plane);
    if !is_inlier(seed) {
        return 0;
    }
    mark[seed] = stamp;
    let mut stack = vec![seed];
    let mut count = 1;
    while let Some(k) = stack.pop() {
        for &m in neighbors.of(k) {
            if mark[m] != stamp {
                mark[m] = stamp;
                if is_inlier(m) {
                    count += 1;
                    stack.push(m);
                }
            }
        }
    }
    count
}

/// Best-of-`iterations` RANSAC plane over `candidates`, refit once by least
/// squares to its inliers. Ties go to the earliest trial.
pub fn fit_plane_ransac<R: Rng + ?Sized>(
    cloud: &LabeledCloud,
    candidates: &[usize],
    cfg: &RansacConfig,
    rng: &mut R,
) -> Result<(Plane, Vec<usize>)> {
    cfg.validate()?;
    let normals = cfg
        .normal_tolerance_deg
        .map(|_| estimate_normals(cloud, cfg.normal_radius));
    fit_with_normals(cloud, candidates, normals.as_deref(), cfg, rng)
}

fn fit_with_normals<R: Rng + ?Sized>(
    cloud: &LabeledCloud,
    candidates: &[usize],
    normals: Option<&[Option<Point3>]>,
    cfg: &RansacConfig,
    rng: &mut R,
) -> Result<(Plane, Vec<usize>)> {
    if candidates.len() < 3 {
        return Err(Error::Degenerate(format!(
            "RANSAC needs 3 points, got {}",
            candidates.len()
        )));
    }
    cloud.check_indices(candidates)?;
    let test = InlierTest::new(cfg, normals);
    let local = cfg.sample_radius.map(|r| (r, CellIndex::new(cloud, candidates, r)));
    let mut best: Option<(usize, Plane)> = None;
    let support = cfg.cluster_radius.map(|r| Neighbors::new(cloud, candidates, r));
    let mut mark = vec![0; candidates.len()];
    let mut near = Vec::new();
    for trial in 1..=cfg.iterations {
        let mut seed = None;
        let [a, b, c] = match &local {
            None => {
                let pick = index::sample(rng, candidates.len(), 3);
                [0, 1, 2].map(|k| cloud.point(candidates[pick.index(k)]))
            }
            Some((r, cells)) => {
                let first = rng.random_range(0..candidates.len());
                cells.within(cloud, candidates, first, *r, &mut near);
                if near.len() < 2 {
                    // isolated point: fall back to a global sample
                    let pick = index::sample(rng, candidates.len(), 3);
                    [0, 1, 2].map(|k| cloud.point(candidates[pick.index(k)]))
                } else {
                    seed = Some(first);
                    let pick = index::sample(rng, near.len(), 2);
                    [
                        cloud.point(candidates[first]),
                        cloud.point(candidates[near[pick.index(0)]]),
                        cloud.point(candidates[near[pick.index(1)]]),
                    ]
                }
            }
        };
        let Some(plane) = Plane::through(a, b, c) else {
            continue;
        };
        let count = match (&support, seed) {
            (Some(nb), Some(k)) => connected_support(cloud, candidates, nb, k, &plane, &test, &mut mark, trial),
            _ => candidates.iter().filter(|&&i| test.accepts(cloud, i, &plane)).count(),
        };
        if best.is_none_or(|(n, _)| count > n) {
            best = Some((count, plane));
        }
    }
    let (_, plane) = best.ok_or_else(|| Error::Degenerate("every RANSAC sample was collinear".into()))?;
    let inliers = test.inliers(cloud, candidates, &plane);
    let pts: Vec<Point3> = inliers.iter().map(|&i| cloud.point(i)).collect();
    match Plane::fit(&pts) {
        Some(refit) => {
            let inliers = test.inliers(cloud, candidates, &refit);
            Ok((refit, inliers))
        }
        None => Ok((plane, inliers)),
    }
}

/// Splits `indices` into groups connected by hops of at most `radius`.
/// Groups come back largest first, ties by smallest member index.
pub fn connected_components(cloud: &LabeledCloud, indices: &[usize], radius: f64) -> Vec<Vec<usize>> {
    let cells = CellIndex::new(cloud, indices, radius).cells;

    let mut parent: Vec<usize> = (0..indices.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let r2 = radius * radius;
    for (k, &i) in indices.iter().enumerate() {
        let p = cloud.point(i);
        let c = cell_of(p, radius);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &m in members {
                        if m > k && p.distance_squared(cloud.point(indices[m])) <= r2 {
                            let (ra, rb) = (find(&mut parent, k), find(&mut parent, m));
                            if ra != rb {
                                parent[ra.max(rb)] = ra.min(rb);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &i) in indices.iter().enumerate() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Grows pieces into unassigned points: each round, every unassigned point
/// joins the piece of its nearest assigned neighbour within `radius`, with
/// ties going to the smaller point index. Points out of reach stay out.
fn absorb_leftovers(cloud: &LabeledCloud, pieces: &mut [Vec<usize>], radius: f64) {
    let mut owner = vec![usize::MAX; cloud.len()];
    for (k, piece) in pieces.iter().enumerate() {
        for &i in piece {
            owner[i] = k;
        }
    }
    let all: Vec<usize> = (0..cloud.len()).collect();
    let cells = CellIndex::new(cloud, &all, radius);
    let mut near = Vec::new();
    let mut pending: Vec<usize> = all.iter().copied().filter(|&i| owner[i] == usize::MAX).collect();
    loop {
        let mut claims = Vec::new();
        for &i in &pending {
            cells.within(cloud, &all, i, radius, &mut near);
            let p = cloud.point(i);
            let nearest = near
                .iter()
                .copied()
                .filter(|&j| owner[j] != usize::MAX)
                .min_by(|&a, &b| {
                    p.distance_squared(cloud.point(a))
                        .total_cmp(&p.distance_squared(cloud.point(b)))
                });
            if let Some(j) = nearest {
                claims.push((i, owner[j]));
            }
        }
        if claims.is_empty() {
            break;
        }
        for &(i, k) in &claims {
            owner[i] = k;
            pieces[k].push(i);
        }
        pending.retain(|&i| owner[i] == usize::MAX);
    }
    for piece in pieces.iter_mut() {
        piece.sort_unstable();
    }
}

/// Repeatedly extracts the dominant plane from the remaining points. Each
/// extracted piece becomes a segment; leftover points form residual segments.
pub fn oversegment(cloud: &LabeledCloud, cfg: &RansacConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taken = vec![false; cloud.len()];
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    let mut planes = 0;
    let normals = cfg
        .normal_tolerance_deg
        .map(|_| estimate_normals(cloud, cfg.normal_radius));

    while planes < cfg.max_planes && remaining.len() >= cfg.min_inliers {
        let (_, inliers) = match fit_with_normals(cloud, &remaining, normals.as_deref(), cfg, &mut rng) {
            Ok(fit) => fit,
            Err(Error::Degenerate(_)) => break,
            Err(e) => return Err(e),
        };
        if inliers.len() < cfg.min_inliers {
            break;
        }
        let kept: Vec<Vec<usize>> = match cfg.cluster_radius {
            Some(r) => connected_components(cloud, &inliers, r)
                .into_iter()
                .filter(|g| g.len() >= cfg.min_inliers)
                .collect(),
            None => vec![inliers],
        };
        if kept.is_empty() {
            break;
        }
        planes += 1;
        for g in kept {
            for &i in &g {
                taken[i] = true;
            }
            pieces.push(g);
        }
        remaining.retain(|&i| !taken[i]);
    }

    match cfg.cluster_radius {
        Some(r) => {
            absorb_leftovers(cloud, &mut pieces, r);
            let mut taken = vec![false; cloud.len()];
            for &i in pieces.iter().flatten() {
                taken[i] = true;
            }
            remaining.retain(|&i| !taken[i]);
            pieces.extend(
                connected_components(cloud, &remaining, r)
                    .into_iter()
                    .filter(|g| g.len() >= cfg.min_inliers),
            );
        }
        None if remaining.len() >= cfg.min_inliers => pieces.push(remaining),
        None => {}
    }

    pieces
        .into_iter()
        .enumerate()
        .map(|(k, g)| Segment::new(SegmentId(k as u32), g))
        .collect()
}

/// Drops every segment holding more than `background_fraction` of the scene.
pub fn remove_background(segments: Vec<Segment>, total_points: usize, cfg: &RansacConfig) -> Vec<Segment> {
    let limit = cfg.background_fraction * total_points as f64;
    segments.into_iter().filter(|s| s.len() as f64 <= limit).collect()
}
