use serde::Serialize;

use super::model::{Batch, Model};
use super::train::{client_step, SimError};
use crate::codecs::CodecConfig;
use crate::tensor::{relu_scalar, SeededRng};

pub const MIN_BIAS_SAMPLES: usize = 10_000;

/// Monte Carlo view of `E[ReLU(Z)] ≠ ReLU(E[Z])` for standard normal `Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub samples: usize,
    /// Sample mean of `ReLU(Z)`.
    pub mean_relu: f64,
    /// Standard error of [`mean_relu`](Self::mean_relu).
    pub std_error: f64,
    /// `ReLU(E[Z]) = ReLU(0)`.
    pub relu_of_mean: f64,
    /// `1/√(2π)`.
    pub exact_mean_relu: f64,
    pub gap: f64,
}

pub fn relu_bias_probe(samples: usize, seed: u64) -> Result<BiasReport, SimError> {
    if samples < MIN_BIAS_SAMPLES {
        return Err(SimError::Config(format!(
            "bias probe needs at least {MIN_BIAS_SAMPLES} samples, got {samples}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let a = relu_scalar(rng.standard_normal());
        sum += a;
        sum_sq += a * a;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let relu_of_mean = relu_scalar(0.0);
    Ok(BiasReport {
        samples,
        mean_relu: mean,
        std_error: (var / n).sqrt(),
        relu_of_mean,
        exact_mean_relu: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        gap: mean - relu_of_mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub label: String,
    #[serde(rename = "E")]
    pub e: f64,
    pub gap_server: f64,
    pub gap_client: f64,
}

/// For each codec (or `None` for lossless), the compression error of the
/// smashed data and the distance of both gradient halves from the exact
/// ones, all on the same model and batch.
pub fn gradient_gap_probe(
    model: &Model<f64>,
    batch: &Batch<f64>,
    sweep: &[Option<CodecConfig>],
) -> Result<Vec<GapRow>, SimError> {
    sweep
        .iter()
        .map(|codec| {
            let step = client_step(model, batch, codec.as_ref())?;
            let label = match codec {
                None => "lossless".to_string(),
                Some(c) => format!("{}(r={}, b={}, q={})", c.codec, c.ratio, c.mask_bits, c.quant_bits),
            };
            Ok(GapRow {
                label,
                e: step.error,
                gap_server: step.compressed.server.distance(&step.exact.server),
                gap_client: step.compressed.client.distance(&step.exact.client),
            })
        })
        .collect()
}
