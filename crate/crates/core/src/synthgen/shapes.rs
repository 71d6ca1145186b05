//! Primitive shapes and uniform surface sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Box {
        sx: f64,
        sy: f64,
        sz: f64,
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    /// Two legs of width `width` along x and y, extruded by `height`.
    Lshape {
        lx: f64,
        ly: f64,
        width: f64,
        height: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Point3,
    /// Rotation about +z, radians.
    pub yaw: f64,
}

impl Pose {
    pub fn apply(&self, p: Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        Point3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + self.translation
    }

    pub fn rotate(&self, v: Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        Point3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub pose: Pose,
    /// Points per square metre.
    pub density: f64,
    /// Leave out the face resting on the table.
    #[serde(default)]
    pub skip_bottom: bool,
}

#[derive(Clone, Copy, Debug)]
enum Surface {
    Rect {
        origin: Point3,
        u: Point3,
        v: Point3,
        normal: Point3,
    },
    Disk {
        center: Point3,
        radius: f64,
        normal: Point3,
    },
    Lateral {
        radius: f64,
        height: f64,
    },
}

impl Surface {
    fn area(&self) -> f64 {
        match *self {
            Surface::Rect { u, v, .. } => u.norm() * v.norm(),
            Surface::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Surface::Lateral { radius, height } => 2.0 * std::f64::consts::PI * radius * height,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (Point3, Point3) {
        match *self {
            Surface::Rect { origin, u, v, normal } => {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                (origin + u * a + v * b, normal)
            }
            Surface::Disk { center, radius, normal } => {
                let r = radius * rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                (center + Point3::new(r * t.cos(), r * t.sin(), 0.0), normal)
            }
            Surface::Lateral { radius, height } => {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let z = rng.random_range(0.0..=height);
                let n = Point3::new(t.cos(), t.sin(), 0.0);
                (n * radius + Point3::new(0.0, 0.0, z), n)
            }
        }
    }
}

fn rect(origin: [f64; 3], u: [f64; 3], v: [f64; 3], normal: [f64; 3]) -> Surface {
    Surface::Rect {
        origin: Point3::from_array(origin),
        u: Point3::from_array(u),
        v: Point3::from_array(v),
        normal: Point3::from_array(normal),
    }
}

/// Axis-aligned box `[x0, x0 + sx] x [y0, y0 + sy] x [0, sz]`, optionally
/// without its bottom face.
fn box_faces(x0: f64, y0: f64, sx: f64, sy: f64, sz: f64, bottom: bool) -> Vec<Surface> {
    let (x1, y1) = (x0 + sx, y0 + sy);
    let mut f = vec![
        rect([x0, y0, sz], [sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]),
        rect([x0, y0, 0.0], [sx, 0.0, 0.0], [0.0, 0.0, sz], [0.0, -1.0, 0.0]),
        rect([x0, y1, 0.0], [sx, 0.0, 0.0], [0.0, 0.0, sz], [0.0, 1.0, 0.0]),
        rect([x0, y0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, sz], [-1.0, 0.0, 0.0]),
        rect([x1, y0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, sz], [1.0, 0.0, 0.0]),
    ];
    if bottom {
        f.push(rect([x0, y0, 0.0], [sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, -1.0]));
    }
    f
}

impl ShapeKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShapeKind::Box { sx, sy, sz } => sx > 0.0 && sy > 0.0 && sz > 0.0,
            ShapeKind::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            ShapeKind::Lshape { lx, ly, width, height } => width > 0.0 && height > 0.0 && width < lx && width < ly,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid shape {self:?}")))
        }
    }

    /// Surfaces in the local frame: footprint centred on the origin, base
    /// at z = 0.
    fn surfaces(&self, bottom: bool) -> Vec<Surface> {
        match *self {
            ShapeKind::Box { sx, sy, sz } => box_faces(-sx / 2.0, -sy / 2.0, sx, sy, sz, bottom),
            ShapeKind::Cylinder { radius, height } => {
                let mut s = vec![
                    Surface::Lateral { radius, height },
                    Surface::Disk {
                        center: Point3::new(0.0, 0.0, height),
                        radius,
                        normal: Point3::new(0.0, 0.0, 1.0),
                    },
                ];
                if bottom {
                    s.push(Surface::Disk {
                        center: Point3::ORIGIN,
                        radius,
                        normal: Point3::new(0.0, 0.0, -1.0),
                    });
                }
                s
            }
            ShapeKind::Lshape {
                lx,
                ly,
                width: w,
                height: h,
            } => {
                let (x0, y0) = (-lx / 2.0, -ly / 2.0);
                let (xw, yw, x1, y1) = (x0 + w, y0 + w, x0 + lx, y0 + ly);
                let mut s = vec![
                    rect([x0, y0, h], [lx, 0.0, 0.0], [0.0, w, 0.0], [0.0, 0.0, 1.0]),
                    rect([x0, yw, h], [w, 0.0, 0.0], [0.0, ly - w, 0.0], [0.0, 0.0, 1.0]),
                    rect([x0, y0, 0.0], [lx, 0.0, 0.0], [0.0, 0.0, h], [0.0, -1.0, 0.0]),
                    rect([x1, y0, 0.0], [0.0, w, 0.0], [0.0, 0.0, h], [1.0, 0.0, 0.0]),
                    rect([xw, yw, 0.0], [lx - w, 0.0, 0.0], [0.0, 0.0, h], [0.0, 1.0, 0.0]),
                    rect([xw, yw, 0.0], [0.0, ly - w, 0.0], [0.0, 0.0, h], [1.0, 0.0, 0.0]),
                    rect([x0, y1, 0.0], [w, 0.0, 0.0], [0.0, 0.0, h], [0.0, 1.0, 0.0]),
                    rect([x0, y0, 0.0], [0.0, ly, 0.0], [0.0, 0.0, h], [-1.0, 0.0, 0.0]),
                ];
                if bottom {
                    s.push(rect([x0, y0, 0.0], [lx, 0.0, 0.0], [0.0, w, 0.0], [0.0, 0.0, -1.0]));
                    s.push(rect([x0, yw, 0.0], [w, 0.0, 0.0], [0.0, ly - w, 0.0], [0.0, 0.0, -1.0]));
                }
                s
            }
        }
    }

    /// Local-frame bounding box.
    pub fn local_bounds(&self) -> Aabb {
        let (hx, hy, h) = match *self {
            ShapeKind::Box { sx, sy, sz } => (sx / 2.0, sy / 2.0, sz),
            ShapeKind::Cylinder { radius, height } => (radius, radius, height),
            ShapeKind::Lshape { lx, ly, height, .. } => (lx / 2.0, ly / 2.0, height),
        };
        Aabb {
            min: Point3::new(-hx, -hy, 0.0),
            max: Point3::new(hx, hy, h),
        }
    }

    pub fn height(&self) -> f64 {
        self.local_bounds().max.z
    }
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.density > 0.0) {
            return Err(Error::InvalidConfig("sampling density must be positive".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.kind.surfaces(!self.skip_bottom).iter().map(Surface::area).sum()
    }

    /// World-frame bounding box.
    pub fn bounds(&self) -> Aabb {
        let local = self.kind.local_bounds();
        if let ShapeKind::Cylinder { .. } = self.kind {
            return Aabb {
                min: local.min + self.pose.translation,
                max: local.max + self.pose.translation,
            };
        }
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = -min;
        for i in 0..8 {
            let c = Point3::new(
                if i & 1 == 0 { local.min.x } else { local.max.x },
                if i & 2 == 0 { local.min.y } else { local.max.y },
                if i & 4 == 0 { local.min.z } else { local.max.z },
            );
            let w = self.pose.apply(c);
            min = min.min(w);
            max = max.max(w);
        }
        Aabb { min, max }
    }
}

/// Surface points with outward normals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceSample {
    pub points: Vec<Point3>,
    pub normals: Vec<Point3>,
}

/// `round(area * density)` points, each drawn from a face chosen with
/// probability proportional to its area.
pub fn sample_shape<R: Rng>(spec: &ShapeSpec, rng: &mut R) -> Result<SurfaceSample> {
    spec.validate()?;
    let surfaces = spec.kind.surfaces(!spec.skip_bottom);
    let areas: Vec<f64> = surfaces.iter().map(Surface::area).collect();
    let count = (areas.iter().sum::<f64>() * spec.density).round() as usize;
    let pick = WeightedIndex::new(&areas).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut out = SurfaceSample::default();
    for _ in 0..count {
        let (p, n) = surfaces[pick.sample(rng)].sample(rng);
        out.points.push(spec.pose.apply(p));
        out.normals.push(spec.pose.rotate(n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: ShapeKind, density: f64) -> ShapeSpec {
        ShapeSpec {
            kind,
            pose: Pose::default(),
            density,
            skip_bottom: false,
        }
    }

    #[test]
    fn unit_box_counts() {
        let s = spec(
            ShapeKind::Box {
                sx: 1.0,
                sy: 1.0,
                sz: 1.0,
            },
            600.0,
        );
        let out = sample_shape(&s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.points.len(), 3600);
        // each face holds 1/6 of the points; sd is about 22
        let top = out.points.iter().filter(|p| (p.z - 1.0).abs() < 1e-12).count();
        let side = out.points.iter().filter(|p| (p.x + 0.5).abs() < 1e-12).count();
        for c in [top, side] {
            assert!((c as i64 - 600).abs() < 90, "face count {c}");
        }
    }

    #[test]
    fn cylinder_lateral_to_cap_ratio() {
        let s = ShapeSpec {
            skip_bottom: true,
            ..spec(
                ShapeKind::Cylinder {
                    radius: 0.1,
                    height: 0.2,
                },
                200_000.0,
            )
        };
        let out = sample_shape(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let cap = out.points.iter().filter(|p| (p.z - 0.2).abs() < 1e-12).count() as f64;
        let lateral = out.points.len() as f64 - cap;
        // lateral 2*pi*r*h against one cap pi*r^2: ratio 4
        assert!((lateral / cap - 4.0).abs() < 0.1, "ratio {}", lateral / cap);
        let full = spec(
            ShapeKind::Cylinder {
                radius: 0.1,
                height: 0.2,
            },
            1.0,
        );
        let caps = 2.0 * std::f64::consts::PI * 0.01;
        let lat = 2.0 * std::f64::consts::PI * 0.1 * 0.2;
        assert!((full.area() - caps - lat).abs() < 1e-12);
        assert!((lat / caps - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lshape_area_and_bounds() {
        let k = ShapeKind::Lshape {
            lx: 0.3,
            ly: 0.2,
            width: 0.1,
            height: 0.1,
        };
        let s = spec(k, 1.0);
        let footprint = 0.3 * 0.1 + 0.1 * 0.1;
        let perimeter = 2.0 * (0.3 + 0.2);
        assert!((s.area() - (2.0 * footprint + perimeter * 0.1)).abs() < 1e-12);
        let out = sample_shape(&spec(k, 20_000.0), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = s.bounds();
        assert!(out.points.iter().all(|&p| b.expanded(1e-12).contains(p)));
        // nothing inside the notch
        assert!(out
            .points
            .iter()
            .all(|p| !(p.x > -0.05 + 1e-9 && p.y > -0.0 + 1e-9 && p.z < 0.1 - 1e-9 && p.z > 1e-9)));
    }

    #[test]
    fn pose_and_determinism() {
        let s = ShapeSpec {
            pose: Pose {
                translation: Point3::new(1.0, 2.0, 0.0),
                yaw: 0.7,
            },
            ..spec(
                ShapeKind::Box {
                    sx: 0.2,
                    sy: 0.1,
                    sz: 0.3,
                },
                5000.0,
            )
        };
        let a = sample_shape(&s, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = sample_shape(&s, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let bounds = s.bounds().expanded(1e-9);
        assert!(a.points.iter().all(|&p| bounds.contains(p)));
        assert!(a.normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(ShapeKind::Box {
            sx: 0.0,
            sy: 1.0,
            sz: 1.0
        }
        .validate()
        .is_err());
        assert!(ShapeKind::Lshape {
            lx: 0.1,
            ly: 0.3,
            width: 0.2,
            height: 0.1
        }
        .validate()
        .is_err());
        let s = spec(
            ShapeKind::Cylinder {
                radius: 0.1,
                height: 0.1,
            },
            0.0,
        );
        assert!(sample_shape(&s, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
