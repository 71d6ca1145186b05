//! Point-cloud primitives shared by every stage of the pipeline: points,
//! labeled clouds, segments, bounding boxes, file I/O and the fixed-size
//! segment sampling fed to the learned predictor.

mod io;
mod sampling;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{format_real, load_cloud, load_ply, load_xyzl, parse_ply, parse_xyzl, save_xyzl, write_xyzl};
pub use sampling::{center_pair, sample_and_pad, segment_sample_seed, SampledSegment};

/// Cartesian point (or vector) in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_squared(self, o: Point3) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    pub fn min(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Ground-truth object label. `0` is background.
pub type Label = u32;

pub const BACKGROUND: Label = 0;

/// Points with optional per-point ground-truth object labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledCloud {
    points: Vec<Point3>,
    labels: Option<Vec<Label>>,
}

impl LabeledCloud {
    pub fn new(points: Vec<Point3>, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != points.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} points",
                    labels.len(),
                    points.len()
                )));
            }
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Degenerate(format!("point {i} is not finite")));
        }
        Ok(LabeledCloud { points, labels })
    }

    pub fn unlabeled(points: Vec<Point3>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point3 {
        self.points[i]
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_indices(&self, indices: &[usize]) -> Result<()> {
        match indices.iter().find(|&&i| i >= self.points.len()) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                len: self.points.len(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub u32);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A set of point indices into a parent cloud. Indices are kept sorted and
/// unique so unions and intersections are linear merges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: SegmentId,
    indices: Vec<usize>,
}

impl Segment {
    pub fn new(id: SegmentId, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptySegment(id));
        }
        Ok(Segment { id, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Union of two segments under a new id.
    pub fn union(&self, other: &Segment, id: SegmentId) -> Segment {
        Segment {
            id,
            indices: merge_sorted(&self.indices, &other.indices),
        }
    }

    pub fn points<'a>(&'a self, cloud: &'a LabeledCloud) -> impl Iterator<Item = Point3> + 'a {
        self.indices.iter().map(move |&i| cloud.point(i))
    }

    pub fn centroid(&self, cloud: &LabeledCloud) -> Point3 {
        let sum = self.points(cloud).fold(Point3::ORIGIN, |acc, p| acc + p);
        sum * (1.0 / self.indices.len() as f64)
    }
}

/// Union of two sorted, deduplicated index lists.
pub fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Size of the intersection of two sorted, deduplicated index lists.
pub fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(Error::Degenerate("box min exceeds max".into()));
        }
        Ok(Aabb { min, max })
    }

    pub fn from_points(points: impl IntoIterator<Item = Point3>) -> Result<Self> {
        let mut it = points.into_iter();
        let first = it.next().ok_or(Error::EmptySelection)?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Ok(Aabb { min, max })
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|i| p.axis(i) >= self.min.axis(i) && p.axis(i) <= self.max.axis(i))
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.max(other.min);
        let max = self.max.min(other.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then_some(Aabb { min, max })
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Point3::new(margin, margin, margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Signed separation: Euclidean gap between disjoint boxes, or minus the
    /// smallest per-axis penetration depth when they overlap.
    pub fn signed_distance(&self, other: &Aabb) -> f64 {
        let mut gap = [0.0f64; 3];
        let mut penetration = f64::INFINITY;
        for (i, g) in gap.iter_mut().enumerate() {
            let lo = self.min.axis(i).max(other.min.axis(i));
            let hi = self.max.axis(i).min(other.max.axis(i));
            if lo > hi {
                *g = lo - hi;
            } else {
                penetration = penetration.min(hi - lo);
            }
        }
        if gap.iter().any(|&g| g > 0.0) {
            gap.iter().map(|g| g * g).sum::<f64>().sqrt()
        } else {
            -penetration
        }
    }
}

/// Tight box over the selected points (all points when `indices` is `None`).
pub fn aabb(cloud: &LabeledCloud, indices: Option<&[usize]>) -> Result<Aabb> {
    match indices {
        Some(idx) => {
            cloud.check_indices(idx)?;
            Aabb::from_points(idx.iter().map(|&i| cloud.point(i)))
        }
        None => Aabb::from_points(cloud.points().iter().copied()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(pts: &[[f64; 3]]) -> LabeledCloud {
        LabeledCloud::unlabeled(pts.iter().map(|&a| Point3::from_array(a)).collect()).unwrap()
    }

    #[test]
    fn aabb_single_point_is_degenerate_box() {
        let c = cloud(&[[1.0, -2.0, 3.5]]);
        let b = aabb(&c, None).unwrap();
        assert_eq!(b.min, b.max);
        assert_eq!(b.min, Point3::new(1.0, -2.0, 3.5));
    }

    #[test]
    fn aabb_two_point_hull() {
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]);
        let b = aabb(&c, None).unwrap();
        assert_eq!(b.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(b.max, Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn aabb_unit_cube_corners() {
        let mut corners = Vec::new();
        for i in 0..8 {
            corners.push([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
        }
        // component-wise min/max over the enumerated corners
        let lo = corners
            .iter()
            .fold([f64::MAX; 3], |a, c| [a[0].min(c[0]), a[1].min(c[1]), a[2].min(c[2])]);
        let hi = corners
            .iter()
            .fold([f64::MIN; 3], |a, c| [a[0].max(c[0]), a[1].max(c[1]), a[2].max(c[2])]);
        let b = aabb(&cloud(&corners), None).unwrap();
        assert_eq!(b.min.to_array(), lo);
        assert_eq!(b.max.to_array(), hi);
        assert_eq!(b.volume(), 1.0);
    }

    #[test]
    fn aabb_empty_selection_errors() {
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(matches!(aabb(&c, Some(&[])), Err(Error::EmptySelection)));
        assert!(matches!(
            aabb(&LabeledCloud::default(), None),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn cloud_rejects_label_length_mismatch_and_nan() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0)];
        assert!(LabeledCloud::new(pts.clone(), Some(vec![1, 2])).is_err());
        assert!(LabeledCloud::unlabeled(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn segment_sorts_and_rejects_empty() {
        let s = Segment::new(SegmentId(4), [5, 1, 3, 1]).unwrap();
        assert_eq!(s.indices(), &[1, 3, 5]);
        assert!(matches!(
            Segment::new(SegmentId(2), []),
            Err(Error::EmptySegment(SegmentId(2)))
        ));
    }

    #[test]
    fn signed_distance_of_separated_and_overlapping_boxes() {
        let a = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let b = Aabb::new(Point3::new(1.5, 0.0, 0.0), Point3::new(2.0, 1.0, 1.0)).unwrap();
        assert!((a.signed_distance(&b) - 0.5).abs() < 1e-12);
        let c = Aabb::new(Point3::new(0.8, 0.0, 0.0), Point3::new(2.0, 1.0, 1.0)).unwrap();
        assert!((a.signed_distance(&c) + 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn aabb_of_union_contains_each_part(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..40),
            split in 1usize..39,
        ) {
            let c = cloud(&pts.iter().map(|&(x, y, z)| [x, y, z]).collect::<Vec<_>>());
            let split = split.min(c.len() - 1);
            let all: Vec<usize> = (0..c.len()).collect();
            let whole = aabb(&c, Some(&all)).unwrap();
            let left = aabb(&c, Some(&all[..split])).unwrap();
            let right = aabb(&c, Some(&all[split..])).unwrap();
            prop_assert!(whole.contains_box(&left));
            prop_assert!(whole.contains_box(&right));
        }

        #[test]
        fn merge_sorted_is_set_union(
            a in prop::collection::btree_set(0usize..60, 0..30),
            b in prop::collection::btree_set(0usize..60, 0..30),
        ) {
            let av: Vec<usize> = a.iter().copied().collect();
            let bv: Vec<usize> = b.iter().copied().collect();
            let expect: Vec<usize> = a.union(&b).copied().collect();
            prop_assert_eq!(merge_sorted(&av, &bv), expect);
            prop_assert_eq!(intersection_len(&av, &bv), a.intersection(&b).count());
        }
    }
}
