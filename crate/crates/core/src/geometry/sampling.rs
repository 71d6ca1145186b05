//! Fixed-size point sampling of segments for the learned predictor.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LabeledCloud, Segment};
use crate::error::{Error, Result};

/// `n x 3` matrix of sampled coordinates; rows at and after `valid_count`
/// are zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSegment {
    rows: Vec<[f64; 3]>,
    valid_count: usize,
}

impl SampledSegment {
    pub fn new(rows: Vec<[f64; 3]>, valid_count: usize) -> Result<Self> {
        if valid_count > rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "valid_count {valid_count} exceeds {} rows",
                rows.len()
            )));
        }
        if rows[valid_count..].iter().any(|r| *r != [0.0; 3]) {
            return Err(Error::ShapeMismatch("padding rows must be zero".into()));
        }
        Ok(SampledSegment { rows, valid_count })
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn valid_rows(&self) -> &[[f64; 3]] {
        &self.rows[..self.valid_count]
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }
}

/// Seed for a segment's point sampling, derived from its point set so the
/// same segment is always sampled identically (FNV-1a over the indices).
pub fn segment_sample_seed(segment: &Segment) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in segment.indices() {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Uniformly samples `n` points without replacement, or keeps every point
/// (in shuffled order) and zero-pads when the segment is smaller than `n`.
pub fn sample_and_pad(cloud: &LabeledCloud, segment: &Segment, n: usize, seed: u64) -> Result<SampledSegment> {
    if segment.is_empty() {
        return Err(Error::EmptySegment(segment.id));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    cloud.check_indices(segment.indices())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = segment.indices();
    let picked: Vec<usize> = if idx.len() >= n {
        index::sample(&mut rng, idx.len(), n)
            .into_iter()
            .map(|k| idx[k])
            .collect()
    } else {
        let mut all = idx.to_vec();
        all.shuffle(&mut rng);
        all
    };
    let valid_count = picked.len();
    let mut rows: Vec<[f64; 3]> = picked.iter().map(|&i| cloud.point(i).to_array()).collect();
    rows.resize(n, [0.0; 3]);
    Ok(SampledSegment { rows, valid_count })
}

/// Translates both segments by the joint centroid of their valid rows.
pub fn center_pair(a: &SampledSegment, b: &SampledSegment) -> Result<(SampledSegment, SampledSegment)> {
    let count = a.valid_count + b.valid_count;
    if count == 0 {
        return Err(Error::Degenerate("pair has no valid points".into()));
    }
    let mut c = [0.0f64; 3];
    for r in a.valid_rows().iter().chain(b.valid_rows()) {
        for k in 0..3 {
            c[k] += r[k];
        }
    }
    for v in &mut c {
        *v /= count as f64;
    }
    let shift = |s: &SampledSegment| {
        let mut rows = s.rows.clone();
        for r in &mut rows[..s.valid_count] {
            for k in 0..3 {
                r[k] -= c[k];
            }
        }
        SampledSegment {
            rows,
            valid_count: s.valid_count,
        }
    };
    Ok((shift(a), shift(b)))
}
