//! Mask-compensated compression of split-learning activations.
//!
//! The crate is generic over the element type through [`Scalar`]; the
//! aliases below fix the common choices.

pub mod bounds;
pub mod codecs;
pub mod scalar;
pub mod slsim;
pub mod tensor;
pub mod wire;

pub use scalar::Scalar;

/// Post-ReLU activation tensor as sent across the cut layer.
pub type FeatureMap = tensor::Tensor<f32>;
pub type FeatureMap64 = tensor::Tensor<f64>;
/// Compressed payload in its on-wire precision.
pub type CompressedPayload = codecs::Payload<f32>;
/// Split network in the simulator's working precision.
pub type SplitModel = slsim::Model<f64>;
