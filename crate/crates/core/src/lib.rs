//! Single-spike temporally coded neural networks.
//!
//! Every neuron fires at most once per stimulus; information lives in
//! *when* it fires, not how often. The crate provides the simulator,
//! the image/spike codec, surrogate-gradient training, a digit
//! classifier, and an adversarial generator/discriminator pair, all
//! generic over the float width.

pub mod backprop;
pub mod checkpoint;
pub mod classifier;
pub mod codec;
pub mod error;
pub mod gan;
pub mod io;
pub mod mat;
pub mod scalar;
pub mod sim;

/// Library crate version, for embedding in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use backprop::{Gradients, TargetVector, TrainHyper};
pub use classifier::{Classification, ClassifierConfig, EpochMetrics, RunMetrics};
pub use codec::{AnalogImage, CodingCostReport};
pub use error::{Error, Result};
pub use gan::{Alternation, GanConfig, GanState};
pub use mat::Mat;
pub use scalar::Scalar;
pub use sim::{Decision, FiringTimes, ForwardPass, LayerParams, LayerTrace, SimConfig};

/// Single-precision layer parameters.
pub type LayerParams32 = LayerParams<f32>;
/// Double-precision layer parameters.
pub type LayerParams64 = LayerParams<f64>;
/// Single-precision training hyperparameters.
pub type TrainHyper32 = TrainHyper<f32>;
/// Double-precision training hyperparameters.
pub type TrainHyper64 = TrainHyper<f64>;
/// Single-precision GAN state.
pub type GanState32 = GanState<f32>;
/// Double-precision GAN state.
pub type GanState64 = GanState<f64>;
