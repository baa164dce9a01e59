//! Multi-client split-learning simulator on a two-layer network whose
//! cut-layer activations travel through a codec.

mod data;
mod model;
mod probes;
mod train;

pub use data::{Dataset, Task};
pub use model::{
    backward_split, client_forward, full_loss, server_forward_loss, Backward, Batch, Gradients, Layer, Matrix,
    Model, ModelError, Targets,
};
pub use probes::{gradient_gap_probe, relu_bias_probe, BiasReport, GapRow, MIN_BIAS_SAMPLES};
pub use train::{
    client_step, init_model, train, transmit, ClientStep, RoundRecord, RunSummary, SimConfig, SimError,
    Simulation, TrainingTrace, DIVERGENCE_LIMIT, TRACE_HEADER,
};
