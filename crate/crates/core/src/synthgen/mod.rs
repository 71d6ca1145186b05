//! Procedural table-top scenes with labeled objects.

mod adversarial;
mod shapes;

pub use adversarial::{contact_pair_objects, find_inflated_pair, InflatedPairPredictor, CONTACT_GAP};
pub use shapes::{sample_shape, Pose, ShapeKind, ShapeSpec, SurfaceSample};

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{save_xyzl, Aabb, Label, LabeledCloud, Point3, BACKGROUND};

/// Placement attempts per object before giving up on it.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeWeights {
    #[serde(rename = "box")]
    pub box_: f64,
    pub cylinder: f64,
    pub lshape: f64,
}

impl Default for ShapeWeights {
    fn default() -> Self {
        ShapeWeights {
            box_: 0.6,
            cylinder: 0.1,
            lshape: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// Table extent along x and y, centred on the origin at z = 0.
    pub table_size: [f64; 2],
    /// Object surface density, points per square metre.
    pub density: f64,
    pub table_density: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub shape_weights: ShapeWeights,
    /// Range of footprint edge lengths.
    pub footprint: [f64; 2],
    pub height: [f64; 2],
    /// Lower bound on the box distance between any two objects; negative
    /// values allow interpenetration.
    pub min_gap: f64,
    /// When set, each new object must lie within this box distance of some
    /// earlier object.
    pub max_gap: Option<f64>,
    /// Keeps only points whose normal faces this direction.
    pub view_direction: Option<[f64; 3]>,
    /// Gaussian noise per coordinate, metres.
    pub noise: f64,
    /// Start every scene with two objects in near contact.
    pub adversarial: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            table_size: [1.2, 1.2],
            density: 8000.0,
            table_density: 8000.0,
            min_objects: 3,
            max_objects: 8,
            shape_weights: ShapeWeights::default(),
            footprint: [0.1, 0.25],
            height: [0.12, 0.3],
            min_gap: 0.05,
            max_gap: None,
            view_direction: None,
            noise: 0.0,
            adversarial: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.table_size[0] > 0.0 && self.table_size[1] > 0.0) {
            return bad("synth.table_size must be positive");
        }
        if !(self.density > 0.0 && self.table_density > 0.0) {
            return bad("synth densities must be positive");
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad("synth needs 1 <= min_objects <= max_objects");
        }
        let w = &self.shape_weights;
        if [w.box_, w.cylinder, w.lshape].iter().any(|v| *v < 0.0) || w.box_ + w.cylinder + w.lshape <= 0.0 {
            return bad("synth.shape_weights must be non-negative with a positive sum");
        }
        if !(self.footprint[0] > 0.0 && self.footprint[0] <= self.footprint[1]) {
            return bad("synth.footprint must be a positive range");
        }
        if !(self.height[0] > 0.0 && self.height[0] <= self.height[1]) {
            return bad("synth.height must be a positive range");
        }
        if self.max_gap.is_some_and(|m| m < self.min_gap) {
            return bad("synth.max_gap must not be below min_gap");
        }
        if self.view_direction.is_some_and(|d| Point3::from_array(d).norm() == 0.0) {
            return bad("synth.view_direction must be non-zero");
        }
        if !(self.noise >= 0.0) {
            return bad("synth.noise must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub label: Label,
    pub shape: ShapeSpec,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub cloud: LabeledCloud,
    pub objects: Vec<SceneObject>,
}

fn random_shape<R: Rng>(spec: &SceneSpec, rng: &mut R) -> ShapeKind {
    let w = &spec.shape_weights;
    let pick = WeightedIndex::new([w.box_, w.cylinder, w.lshape]).expect("validated weights");
    let [f0, f1] = spec.footprint;
    let mut edge = || rng.random_range(f0..=f1);
    let (a, b) = (edge(), edge());
    let height = rng.random_range(spec.height[0]..=spec.height[1]);
    match pick.sample(rng) {
        0 => ShapeKind::Box {
            sx: a,
            sy: b,
            sz: height,
        },
        1 => ShapeKind::Cylinder {
            radius: a.min(b) / 2.0,
            height,
        },
        _ => {
            let (lx, ly) = (a.max(f0 * 1.5), b.max(f0 * 1.5));
            ShapeKind::Lshape {
                lx,
                ly,
                width: lx.min(ly) * rng.random_range(0.35..0.6),
                height,
            }
        }
    }
}

/// True when `candidate` honours the gap constraints against `placed`.
fn gap_ok(spec: &SceneSpec, candidate: &Aabb, placed: &[Aabb]) -> bool {
    let dists: Vec<f64> = placed.iter().map(|b| candidate.signed_distance(b)).collect();
    if dists.iter().any(|&d| d < spec.min_gap) {
        return false;
    }
    match spec.max_gap {
        Some(m) if !dists.is_empty() => dists.iter().any(|&d| d <= m),
        _ => true,
    }
}

pub(crate) fn on_table(spec: &SceneSpec, b: &Aabb) -> bool {
    let (hx, hy) = (spec.table_size[0] / 2.0, spec.table_size[1] / 2.0);
    b.min.x >= -hx && b.max.x <= hx && b.min.y >= -hy && b.max.y <= hy
}

/// Rejection-samples a pose for `kind` on the table.
fn place<R: Rng>(spec: &SceneSpec, kind: ShapeKind, placed: &[Aabb], rng: &mut R) -> Option<ShapeSpec> {
    let (hx, hy) = (spec.table_size[0] / 2.0, spec.table_size[1] / 2.0);
    for _ in 0..MAX_REJECTIONS {
        let shape = ShapeSpec {
            kind,
            pose: Pose {
                translation: Point3::new(rng.random_range(-hx..=hx), rng.random_range(-hy..=hy), 0.0),
                yaw: rng.random_range(0.0..std::f64::consts::TAU),
            },
            density: spec.density,
            skip_bottom: true,
        };
        let b = shape.bounds();
        if on_table(spec, &b) && gap_ok(spec, &b, placed) {
            return Some(shape);
        }
    }
    None
}

/// Table (label 0) plus objects labeled 1..N in placement order.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(spec.min_objects..=spec.max_objects);
    let mut shapes: Vec<ShapeSpec> = Vec::new();
    if spec.adversarial {
        shapes.extend(contact_pair_objects(spec, &mut rng).ok_or(Error::TableTooSmall {
            placed: 0,
            required: spec.min_objects,
        })?);
    }
    while shapes.len() < target {
        let boxes: Vec<Aabb> = shapes.iter().map(ShapeSpec::bounds).collect();
        let kind = random_shape(spec, &mut rng);
        match place(spec, kind, &boxes, &mut rng) {
            Some(s) => shapes.push(s),
            None => {
                log::warn!(
                    "placed {} of {target} objects after {MAX_REJECTIONS} rejections",
                    shapes.len()
                );
                break;
            }
        }
    }
    if shapes.len() < spec.min_objects {
        return Err(Error::TableTooSmall {
            placed: shapes.len(),
            required: spec.min_objects,
        });
    }

    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    let table_area = spec.table_size[0] * spec.table_size[1];
    let (hx, hy) = (spec.table_size[0] / 2.0, spec.table_size[1] / 2.0);
    for _ in 0..(table_area * spec.table_density).round() as usize {
        points.push(Point3::new(rng.random_range(-hx..=hx), rng.random_range(-hy..=hy), 0.0));
        normals.push(Point3::new(0.0, 0.0, 1.0));
        labels.push(BACKGROUND);
    }
    for (i, shape) in shapes.iter().enumerate() {
        let s = sample_shape(shape, &mut rng)?;
        labels.extend(std::iter::repeat_n(i as Label + 1, s.points.len()));
        points.extend(s.points);
        normals.extend(s.normals);
    }
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for p in &mut points {
            *p += Point3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        }
    }
    if let Some(d) = spec.view_direction {
        let d = Point3::from_array(d);
        let keep: Vec<bool> = normals.iter().map(|n| n.dot(d) >= 0.0).collect();
        let mut k = keep.iter();
        points.retain(|_| *k.next().expect("same length"));
        let mut k = keep.iter();
        labels.retain(|_| *k.next().expect("same length"));
    }
    let mut objects: Vec<SceneObject> = shapes
        .into_iter()
        .enumerate()
        .map(|(i, shape)| SceneObject {
            label: i as Label + 1,
            shape,
            indices: Vec::new(),
        })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        if l != BACKGROUND {
            objects[l as usize - 1].indices.push(i);
        }
    }
    Ok(Scene {
        cloud: LabeledCloud::new(points, Some(labels))?,
        objects,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Split,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenes: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Scene paths of one split, resolved against `base`.
    pub fn paths(&self, split: Split, base: &Path) -> Vec<PathBuf> {
        self.scenes
            .iter()
            .filter(|s| s.split == split)
            .map(|s| {
                if s.path.is_absolute() {
                    s.path.clone()
                } else {
                    base.join(&s.path)
                }
            })
            .collect()
    }
}

/// Sizes of the validation and test splits; train takes the rest.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let val = n * 15 / 100;
    let test = n * 15 / 100;
    (n - val - test, val, test)
}

/// Per-scene seed derived from the dataset seed.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `scene_XXXX.xyzl` files and a manifest with a seeded 70/15/15
/// split. Manifest paths are relative to `out_dir`.
pub fn generate_dataset(n_scenes: usize, spec: &SceneSpec, seed: u64, out_dir: &Path) -> Result<Manifest> {
    if n_scenes == 0 {
        return Err(Error::InvalidConfig("at least one scene is required".into()));
    }
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (train, val, _) = split_sizes(n_scenes);
    let mut order: Vec<usize> = (0..n_scenes).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
    let mut splits = vec![Split::Test; n_scenes];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    let mut manifest = Manifest::default();
    for (i, split) in splits.into_iter().enumerate() {
        let s = scene_seed(seed, i);
        let scene = generate_scene(spec, s)?;
        let name = PathBuf::from(format!("scene_{i:04}.xyzl"));
        save_xyzl(out_dir.join(&name), &scene.cloud)?;
        manifest.scenes.push(ManifestEntry {
            path: name,
            split,
            seed: s,
        });
    }
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
