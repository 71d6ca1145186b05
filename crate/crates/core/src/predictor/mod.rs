//! Pair groupability predictors.

mod adam;
mod heuristic;
mod network;
mod oracle;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use heuristic::{heuristic_predict, HeuristicConfig, HeuristicPredictor};
pub use network::{
    bce_loss, loss_gradients, sigmoid, Dense, Layers, LossBreakdown, ModelConfig, PairSample, PredictorModel,
    PROB_CLAMP,
};
pub use oracle::{majority_label, OraclePredictor};

use crate::error::Result;
use crate::geometry::{center_pair, sample_and_pad, segment_sample_seed, LabeledCloud, SampledSegment, Segment};

/// Estimates the probability that two segments belong to the same object.
///
/// Implementations must be deterministic. Callers pass the segment with the
/// smaller id first.
pub trait GroupingPredictor {
    fn predict(&self, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64>;
}

impl<P: GroupingPredictor + ?Sized> GroupingPredictor for &P {
    fn predict(&self, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        (**self).predict(cloud, a, b)
    }
}

impl<P: GroupingPredictor + ?Sized> GroupingPredictor for Box<P> {
    fn predict(&self, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        (**self).predict(cloud, a, b)
    }
}

/// Adapts a closure over segments.
pub struct FnPredictor<F>(pub F);

impl<F> GroupingPredictor for FnPredictor<F>
where
    F: Fn(&Segment, &Segment) -> f64,
{
    fn predict(&self, _cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        Ok((self.0)(a, b))
    }
}

/// Samples both segments with their index-derived seeds and centers the
/// pair; the exact input the network sees at train and inference time.
pub fn sample_pair(
    cloud: &LabeledCloud,
    a: &Segment,
    b: &Segment,
    n: usize,
) -> Result<(SampledSegment, SampledSegment)> {
    let sa = sample_and_pad(cloud, a, n, segment_sample_seed(a))?;
    let sb = sample_and_pad(cloud, b, n, segment_sample_seed(b))?;
    center_pair(&sa, &sb)
}

#[derive(Clone, Debug)]
pub struct ModelPredictor {
    pub model: PredictorModel,
}

impl ModelPredictor {
    pub fn new(model: PredictorModel) -> Self {
        ModelPredictor { model }
    }
}

impl GroupingPredictor for ModelPredictor {
    fn predict(&self, cloud: &LabeledCloud, a: &Segment, b: &Segment) -> Result<f64> {
        let (sa, sb) = sample_pair(cloud, a, b, self.model.sample_n())?;
        self.model.predict_pair(&sa, &sb)
    }
}
