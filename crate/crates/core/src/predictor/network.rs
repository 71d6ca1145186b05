//! Point encoder with max pooling, pair MLP, loss and reverse-mode gradients.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{format_real, SampledSegment};

/// Lower and upper clamp applied to predictions before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

const MAGIC: &str = "RGMODEL 1";

/// Affine layer; `weight` is `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weight: Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.inputs(), self.outputs())
    }
}

/// All trainable layers. Also used as the container for gradients and
/// optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Layers {
    pub encoder: Vec<Dense>,
    pub head: Vec<Dense>,
}

impl Layers {
    pub fn zeros_like(&self) -> Self {
        Layers {
            encoder: self.encoder.iter().map(Dense::zeros_like).collect(),
            head: self.head.iter().map(Dense::zeros_like).collect(),
        }
    }

    fn dense(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(&self.head)
    }

    fn dense_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder.iter_mut().chain(&mut self.head)
    }

    /// Named tensors in file order: each layer's weight then bias.
    pub fn named(&self) -> Vec<(String, &Dense)> {
        let enc = self
            .encoder
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("encoder.{i}"), d));
        let head = self.head.iter().enumerate().map(|(i, d)| (format!("head.{i}"), d));
        enc.chain(head).collect()
    }

    /// Flat parameter slices, weight then bias per layer, paired with a flag
    /// that is true for weight matrices.
    pub fn slices(&self) -> Vec<(&[f64], bool)> {
        self.dense()
            .flat_map(|d| {
                [
                    (d.weight.as_slice().expect("standard layout"), true),
                    (d.bias.as_slice().expect("standard layout"), false),
                ]
            })
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        self.dense_mut()
            .flat_map(|d| {
                [
                    (d.weight.as_slice_mut().expect("standard layout"), true),
                    (d.bias.as_slice_mut().expect("standard layout"), false),
                ]
            })
            .collect()
    }

    pub fn same_shape(&self, other: &Layers) -> bool {
        self.encoder.len() == other.encoder.len()
            && self.head.len() == other.head.len()
            && self
                .dense()
                .zip(other.dense())
                .all(|(a, b)| a.weight.dim() == b.weight.dim())
    }

    pub fn parameter_count(&self) -> usize {
        self.dense().map(|d| d.weight.len() + d.bias.len()).sum()
    }

    /// Sum of squared weight-matrix entries; biases excluded.
    pub fn weight_sq_sum(&self) -> f64 {
        self.dense().map(|d| d.weight.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|(s, _)| s.iter().all(|v| v.is_finite()))
    }

    fn add_scaled(&mut self, other: &Layers, scale: f64) {
        for (a, b) in self.dense_mut().zip(other.dense()) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_widths: Vec<usize>,
    pub mlp_widths: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_widths: vec![32, 64, 128],
            mlp_widths: vec![128, 64, 32],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths.is_empty() {
            return Err(Error::InvalidConfig("model.encoder_widths must not be empty".into()));
        }
        if self.encoder_widths.iter().chain(&self.mlp_widths).any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub layers: Layers,
    sample_n: usize,
    seed: u64,
}

struct EncoderTrace {
    /// `acts[0]` is the input, `acts[l + 1]` the ReLU output of layer `l`.
    acts: Vec<Array2<f64>>,
    argmax: Vec<usize>,
    feature: Array1<f64>,
}

struct HeadTrace {
    /// `inputs[l]` is the input of head layer `l`.
    inputs: Vec<Array1<f64>>,
    logit: f64,
}

/// One training example: centered inputs, label in {0, 1}, positive weight.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub a: SampledSegment,
    pub b: SampledSegment,
    pub label: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub bce: f64,
    pub penalty: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.bce + self.penalty
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn relu_inplace<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) {
    a.mapv_inplace(|v| v.max(0.0));
}

impl PredictorModel {
    pub fn new(cfg: &ModelConfig, sample_n: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut encoder = Vec::new();
        let mut width = 3;
        for &w in &cfg.encoder_widths {
            encoder.push(Dense::glorot(width, w, &mut rng));
            width = w;
        }
        let mut head = Vec::new();
        width *= 2;
        for &w in cfg.mlp_widths.iter().chain(&[1]) {
            head.push(Dense::glorot(width, w, &mut rng));
            width = w;
        }
        Self::from_layers(Layers { encoder, head }, sample_n, cfg.seed)
    }

    /// Checks that layer shapes chain from 3 inputs to a single logit.
    pub fn from_layers(layers: Layers, sample_n: usize, seed: u64) -> Result<Self> {
        if sample_n == 0 {
            return Err(Error::InvalidConfig("sample.n must be at least 1".into()));
        }
        if layers.encoder.is_empty() || layers.head.is_empty() {
            return Err(Error::ShapeMismatch("encoder and head need at least one layer".into()));
        }
        let mut width = 3;
        for (name, d) in layers.named() {
            if name == "head.0" {
                width *= 2;
            }
            if d.inputs() != width || d.bias.len() != d.outputs() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {width} inputs, got {}x{} with bias {}",
                    d.outputs(),
                    d.inputs(),
                    d.bias.len()
                )));
            }
            width = d.outputs();
        }
        if width != 1 {
            return Err(Error::ShapeMismatch(format!("final width {width}, expected 1")));
        }
        if !layers.is_finite() {
            return Err(Error::Degenerate("non-finite model parameter".into()));
        }
        Ok(PredictorModel { layers, sample_n, seed })
    }

    pub fn sample_n(&self) -> usize {
        self.sample_n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_width(&self) -> usize {
        self.layers.encoder.last().map_or(0, Dense::outputs)
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        self.layers.encoder.iter().map(Dense::outputs).collect()
    }

    pub fn mlp_widths(&self) -> Vec<usize> {
        let h = &self.layers.head;
        h[..h.len() - 1].iter().map(Dense::outputs).collect()
    }

    fn input_matrix(&self, s: &SampledSegment) -> Result<Array2<f64>> {
        if s.n() != self.sample_n {
            return Err(Error::ShapeMismatch(format!(
                "segment has {} rows, model expects {}",
                s.n(),
                self.sample_n
            )));
        }
        let flat: Vec<f64> = s.rows().iter().flatten().copied().collect();
        Ok(Array2::from_shape_vec((s.n(), 3), flat).expect("n x 3"))
    }

    fn encode_trace(&self, s: &SampledSegment) -> Result<EncoderTrace> {
        let mut acts = vec![self.input_matrix(s)?];
        for d in &self.layers.encoder {
            let mut h = acts.last().expect("input").dot(&d.weight.t()) + &d.bias;
            relu_inplace(&mut h);
            acts.push(h);
        }
        let last = acts.last().expect("output");
        let mut argmax = Vec::with_capacity(last.ncols());
        let mut feature = Array1::zeros(last.ncols());
        for (j, col) in last.axis_iter(Axis(1)).enumerate() {
            let mut best = 0;
            for (r, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = r;
                }
            }
            argmax.push(best);
            feature[j] = col[best];
        }
        Ok(EncoderTrace { acts, argmax, feature })
    }

    /// Shared per-point MLP followed by a coordinate-wise max over rows.
    pub fn encode_segment(&self, s: &SampledSegment) -> Result<Array1<f64>> {
        Ok(self.encode_trace(s)?.feature)
    }

    fn head_trace(&self, fa: &Array1<f64>, fb: &Array1<f64>) -> HeadTrace {
        let mut z = ndarray::concatenate![Axis(0), *fa, *fb];
        let mut inputs = Vec::with_capacity(self.layers.head.len());
        let last = self.layers.head.len() - 1;
        for (l, d) in self.layers.head.iter().enumerate() {
            let mut next = d.weight.dot(&z) + &d.bias;
            if l < last {
                relu_inplace(&mut next);
            }
            inputs.push(std::mem::replace(&mut z, next));
        }
        HeadTrace { inputs, logit: z[0] }
    }

    pub fn predict_pair(&self, a: &SampledSegment, b: &SampledSegment) -> Result<f64> {
        let fa = self.encode_segment(a)?;
        let fb = self.encode_segment(b)?;
        Ok(sigmoid(self.head_trace(&fa, &fb).logit))
    }

    fn backward_encoder(&self, trace: &EncoderTrace, dfeat: &[f64], grads: &mut [Dense]) {
        let n = trace.acts[0].nrows();
        let mut d = Array2::zeros((n, dfeat.len()));
        for (j, (&r, &g)) in trace.argmax.iter().zip(dfeat).enumerate() {
            d[[r, j]] += g;
        }
        for l in (0..self.layers.encoder.len()).rev() {
            d.zip_mut_with(&trace.acts[l + 1], |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            grads[l].weight += &d.t().dot(&trace.acts[l]);
            grads[l].bias += &d.sum_axis(Axis(0));
            if l > 0 {
                d = d.dot(&self.layers.encoder[l].weight);
            }
        }
    }

    /// Adds the gradient of `dlogit * logit` for one pair into `grads`.
    fn backward_pair(&self, ta: &EncoderTrace, tb: &EncoderTrace, th: &HeadTrace, dlogit: f64, grads: &mut Layers) {
        let mut d = Array1::from_elem(1, dlogit);
        for l in (0..self.layers.head.len()).rev() {
            let x = &th.inputs[l];
            let outer = d.view().insert_axis(Axis(1)).dot(&x.view().insert_axis(Axis(0)));
            grads.head[l].weight += &outer;
            grads.head[l].bias += &d;
            let mut dx = self.layers.head[l].weight.t().dot(&d);
            if l > 0 {
                dx.zip_mut_with(x, |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            d = dx;
        }
        let f = self.feature_width();
        let d = d.as_slice().expect("contiguous");
        self.backward_encoder(ta, &d[..f], &mut grads.encoder);
        self.backward_encoder(tb, &d[f..], &mut grads.encoder);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nsample_n {}\n", self.sample_n);
        for (name, d) in self.layers.named() {
            let _ = writeln!(out, "tensor {name}.weight {} {}", d.outputs(), d.inputs());
            for row in d.weight.rows() {
                let line: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            let _ = writeln!(out, "tensor {name}.bias 1 {}", d.bias.len());
            let line: Vec<String> = d.bias.iter().map(|&v| format_real(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::parse(ln, format!("expected '{MAGIC}'")));
        }
        let (ln, line) = next("sample_n")?;
        let sample_n = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["sample_n", n] => n.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()))?,
            _ => return Err(Error::parse(ln, "expected 'sample_n <n>'")),
        };
        let mut encoder = Vec::new();
        let mut head = Vec::new();
        while let Ok((ln, line)) = next("tensor") {
            if line.is_empty() {
                continue;
            }
            let weight = read_tensor(ln, line, &mut next)?;
            let (ln_b, line_b) = next("bias tensor")?;
            let bias = read_tensor(ln_b, line_b, &mut next)?;
            let (wname, wm) = weight;
            let (bname, bm) = bias;
            let layer_name = wname
                .strip_suffix(".weight")
                .ok_or_else(|| Error::parse(ln, format!("expected a weight tensor, got {wname}")))?;
            if bname != format!("{layer_name}.bias") || bm.nrows() != 1 {
                return Err(Error::parse(ln_b, format!("expected {layer_name}.bias with 1 row")));
            }
            let dense = Dense {
                weight: wm,
                bias: bm.row(0).to_owned(),
            };
            let (group, index) = layer_name
                .split_once('.')
                .ok_or_else(|| Error::parse(ln, format!("bad tensor name {layer_name}")))?;
            let target = match group {
                "encoder" => &mut encoder,
                "head" => &mut head,
                _ => return Err(Error::parse(ln, format!("unknown tensor group {group}"))),
            };
            if index.parse::<usize>().ok() != Some(target.len()) {
                return Err(Error::parse(ln, format!("tensor {layer_name} out of order")));
            }
            target.push(dense);
        }
        PredictorModel::from_layers(Layers { encoder, head }, sample_n, 0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn read_tensor<'a, F>(ln: usize, header: &str, next: &mut F) -> Result<(String, Array2<f64>)>
where
    F: FnMut(&str) -> Result<(usize, &'a str)>,
{
    let parts: Vec<&str> = header.split_whitespace().collect();
    let ["tensor", name, rows, cols] = parts.as_slice() else {
        return Err(Error::parse(ln, "expected 'tensor <name> <rows> <cols>'"));
    };
    let rows: usize = rows.parse().map_err(|_| Error::parse(ln, "bad row count"))?;
    let cols: usize = cols.parse().map_err(|_| Error::parse(ln, "bad column count"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (ln, line) = next("tensor row")?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(ln, format!("bad number '{tok}'")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::parse(ln, format!("expected {cols} values")));
        }
    }
    let m = Array2::from_shape_vec((rows, cols), data).expect("rows x cols");
    Ok((name.to_string(), m))
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Weighted binary cross-entropy, averaged over examples. Weights default
/// to 1.
pub fn bce_loss(predictions: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if predictions.len() != labels.len() || weights.is_some_and(|w| w.len() != labels.len()) {
        return Err(Error::ShapeMismatch(
            "predictions, labels and weights differ in length".into(),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut sum = 0.0;
    for (i, (&g, &y)) in predictions.iter().zip(labels).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let g = clamp_prob(g);
        sum -= w * (y * g.ln() + (1.0 - y) * (1.0 - g).ln());
    }
    Ok(sum / predictions.len() as f64)
}

/// Loss and exact gradients of mean BCE plus `weight_decay * sum(W^2)`.
pub fn loss_gradients<'a, I>(model: &PredictorModel, batch: I, weight_decay: f64) -> Result<(LossBreakdown, Layers)>
where
    I: IntoIterator<Item = &'a PairSample>,
{
    let mut grads = model.layers.zeros_like();
    let mut bce = 0.0;
    let mut count = 0usize;
    for sample in batch {
        let ta = model.encode_trace(&sample.a)?;
        let tb = model.encode_trace(&sample.b)?;
        let th = model.head_trace(&ta.feature, &tb.feature);
        let p = sigmoid(th.logit);
        let pc = clamp_prob(p);
        let (y, w) = (sample.label, sample.weight);
        bce -= w * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
        let dlogit = if p == pc { w * (p - y) } else { 0.0 };
        if dlogit != 0.0 {
            model.backward_pair(&ta, &tb, &th, dlogit, &mut grads);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    let inv = 1.0 / count as f64;
    let mut scaled = model.layers.zeros_like();
    scaled.add_scaled(&grads, inv);
    if weight_decay != 0.0 {
        for (g, p) in scaled.dense_mut().zip(model.layers.dense()) {
            g.weight.scaled_add(2.0 * weight_decay, &p.weight);
        }
    }
    let loss = LossBreakdown {
        bce: bce * inv,
        penalty: weight_decay * model.layers.weight_sq_sum(),
    };
    Ok((loss, scaled))
}
