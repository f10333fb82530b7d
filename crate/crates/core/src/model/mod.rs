//! The compact saliency predictor: parameters, forward/backward passes, loss, schedule,
//! training rounds and the multi-round adaptation pipeline.

pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod params;
pub mod pipeline;
pub mod schedule;
pub mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint};
pub use loss::{weighted_bce, LOG_EPS};
pub use network::{backward_from_logits, forward, forward_planar, Activations};
pub use params::{architecture, LayerShape, ParamGroup, PredictorParams};
pub use pipeline::{
    run_pipeline, PipelineData, PipelineOutput, RoundArtifacts, RoundMetrics, RoundObserver,
};
pub use schedule::one_cycle_lr;
pub use train::{backward, round_loss, train_round, Gradient, LossReport, Sample, Sgd};

use crate::error::Result;
use crate::imaging::{GrayMap, RgbImage};

/// Anything that maps an image to a saliency map of the same size.
pub trait Predictor: Sync {
    fn predict(&self, image: &RgbImage) -> Result<GrayMap>;
}

impl Predictor for PredictorParams {
    fn predict(&self, image: &RgbImage) -> Result<GrayMap> {
        forward(self, image)
    }
}

impl<F> Predictor for F
where
    F: Fn(&RgbImage) -> Result<GrayMap> + Sync,
{
    fn predict(&self, image: &RgbImage) -> Result<GrayMap> {
        self(image)
    }
}
