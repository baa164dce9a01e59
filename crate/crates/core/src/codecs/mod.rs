//! Feature-map compressors: mask-encoded sparsification (MS), Top-k
//! sparsification (SP), uniform quantization (QU) and randomized Top-k (RT),
//! one shared decoder, and error/rate metrics.

mod metrics;
mod ms;
mod payload;
mod quant;
mod select;
mod sparse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorError};

pub use metrics::{compression_error, compression_rate, compressed_bits, ErrorReport};
pub use ms::{ms_encode, ms_reconstruct};
pub use payload::{decode, Mask, Payload};
pub use quant::{qu_encode, qu_reconstruct};
pub use select::select_top_k;
pub use sparse::{rt_encode, sp_encode};

/// Bit width `f` of one uncompressed element.
pub const FLOAT_BITS: u64 = 32;

/// Largest mask bit width `b` or quantization width `q` accepted.
pub const MAX_BITS: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodecKind {
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "QU")]
    Qu,
    #[serde(rename = "RT")]
    Rt,
}

impl CodecKind {
    pub const ALL: [CodecKind; 4] = [CodecKind::Ms, CodecKind::Sp, CodecKind::Qu, CodecKind::Rt];

    /// Identifier written to the wire header.
    pub fn id(self) -> u8 {
        match self {
            CodecKind::Ms => 0,
            CodecKind::Sp => 1,
            CodecKind::Qu => 2,
            CodecKind::Rt => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecKind::Ms => "MS",
            CodecKind::Sp => "SP",
            CodecKind::Qu => "QU",
            CodecKind::Rt => "RT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How MS treats the sign of filtered values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// Input must be non-negative (post-ReLU); mask fields are `b` bits.
    #[default]
    NonNegativeOnly,
    /// Mask fields are `b + 1` bits; the top bit carries the sign of a
    /// filtered value and the lower `b` bits its magnitude code.
    SignBit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    pub codec: CodecKind,
    /// Sparsification ratio `r` (MS, SP, RT); `k = floor((1 − r)·d)`.
    #[serde(default)]
    pub ratio: f64,
    /// Mask bit width `b` (MS).
    #[serde(default = "default_bits")]
    pub mask_bits: u8,
    /// Quantization bit width `q` (QU).
    #[serde(default = "default_bits")]
    pub quant_bits: u8,
    #[serde(default)]
    pub sign_mode: SignMode,
    /// Sampling seed (RT, and QU with stochastic rounding).
    #[serde(default)]
    pub seed: u64,
    /// QU only: round up with probability equal to the fractional level,
    /// giving an unbiased quantizer.
    #[serde(default)]
    pub stochastic_rounding: bool,
}

fn default_bits() -> u8 {
    1
}

impl CodecConfig {
    fn base(codec: CodecKind) -> Self {
        Self {
            codec,
            ratio: 0.0,
            mask_bits: 1,
            quant_bits: 1,
            sign_mode: SignMode::NonNegativeOnly,
            seed: 0,
            stochastic_rounding: false,
        }
    }

    pub fn ms(ratio: f64, mask_bits: u8) -> Self {
        Self {
            ratio,
            mask_bits,
            ..Self::base(CodecKind::Ms)
        }
    }

    pub fn sp(ratio: f64) -> Self {
        Self {
            ratio,
            ..Self::base(CodecKind::Sp)
        }
    }

    pub fn qu(quant_bits: u8) -> Self {
        Self {
            quant_bits,
            ..Self::base(CodecKind::Qu)
        }
    }

    pub fn rt(ratio: f64, seed: u64) -> Self {
        Self {
            ratio,
            seed,
            ..Self::base(CodecKind::Rt)
        }
    }

    pub fn with_sign_mode(mut self, mode: SignMode) -> Self {
        self.sign_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stochastic_rounding(mut self, on: bool) -> Self {
        self.stochastic_rounding = on;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match self.codec {
            CodecKind::Ms | CodecKind::Sp | CodecKind::Rt => {
                if !(self.ratio.is_finite() && (0.0..1.0).contains(&self.ratio)) {
                    return Err(CodecError::InvalidParameter(format!(
                        "sparsification ratio {} outside [0, 1)",
                        self.ratio
                    )));
                }
            }
            CodecKind::Qu => {}
        }
        if self.codec == CodecKind::Ms && !(1..=MAX_BITS).contains(&self.mask_bits) {
            return Err(CodecError::InvalidParameter(format!(
                "mask bit width {} outside 1..={MAX_BITS}",
                self.mask_bits
            )));
        }
        if self.codec == CodecKind::Qu && !(1..=MAX_BITS).contains(&self.quant_bits) {
            return Err(CodecError::InvalidParameter(format!(
                "quantization bit width {} outside 1..={MAX_BITS}",
                self.quant_bits
            )));
        }
        Ok(())
    }

    /// Number of retained top values for a `d`-element tensor; at least one.
    pub fn retained(&self, d: usize) -> Result<usize, CodecError> {
        let k = retained_count(self.ratio, d);
        if k < 1 || k > d {
            return Err(CodecError::InvalidParameter(format!(
                "ratio {} keeps k = {k} of d = {d} values; need 1 <= k <= d",
                self.ratio
            )));
        }
        Ok(k)
    }

    /// Per-element mask field width on the wire.
    pub fn field_width(&self) -> u8 {
        match self.codec {
            CodecKind::Ms => self.mask_bits + u8::from(self.sign_mode == SignMode::SignBit),
            CodecKind::Sp | CodecKind::Rt => 1,
            CodecKind::Qu => self.quant_bits,
        }
    }

    fn expect(&self, codec: CodecKind) -> Result<(), CodecError> {
        if self.codec != codec {
            return Err(CodecError::WrongCodec {
                expected: codec,
                found: self.codec,
            });
        }
        self.validate()
    }
}

/// `floor((1 − r)·d)`, snapping products within floating round-off of an
/// integer to that integer (so `r = 0.9, d = 10` keeps one value, not zero).
pub fn retained_count(ratio: f64, d: usize) -> usize {
    let exact = (1.0 - ratio) * d as f64;
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest.max(0.0) as usize
    } else {
        exact.floor().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config is for {found}, encoder expects {expected}")]
    WrongCodec { expected: CodecKind, found: CodecKind },
    #[error("negative value at index {index} with sign mode NonNegativeOnly")]
    NegativeInput { index: usize },
    #[error("corrupt payload: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Encodes `x` with whichever codec `cfg` selects.
pub fn encode<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Payload<T>, CodecError> {
    match cfg.codec {
        CodecKind::Ms => ms_encode(x, cfg),
        CodecKind::Sp => sp_encode(x, cfg),
        CodecKind::Qu => qu_encode(x, cfg),
        CodecKind::Rt => rt_encode(x, cfg),
    }
}

/// Encode followed by decode.
pub fn roundtrip<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Tensor<T>, CodecError> {
    decode(&encode(x, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retained_count_floors_with_snapping() {
        assert_eq!(retained_count(0.99, 100), 1);
        assert_eq!(retained_count(0.9, 10), 1);
        assert_eq!(retained_count(0.5, 7), 3);
        assert_eq!(retained_count(0.0, 7), 7);
        assert_eq!(retained_count(0.99, 4096), 40);
        assert_eq!(retained_count(0.96875, 4096), 128);
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::ms(1.0, 2).validate().is_err());
        assert!(CodecConfig::ms(-0.1, 2).validate().is_err());
        assert!(CodecConfig::ms(0.5, 0).validate().is_err());
        assert!(CodecConfig::ms(0.5, 17).validate().is_err());
        assert!(CodecConfig::qu(0).validate().is_err());
        assert!(CodecConfig::qu(3).validate().is_ok());
        assert!(CodecConfig::sp(0.99).retained(50).is_err());
        assert_eq!(CodecConfig::sp(0.99).retained(100), Ok(1));
    }

    #[test]
    fn field_widths() {
        assert_eq!(CodecConfig::ms(0.5, 2).field_width(), 2);
        assert_eq!(
            CodecConfig::ms(0.5, 2).with_sign_mode(SignMode::SignBit).field_width(),
            3
        );
        assert_eq!(CodecConfig::sp(0.5).field_width(), 1);
        assert_eq!(CodecConfig::qu(5).field_width(), 5);
    }

    #[test]
    fn codec_ids_roundtrip() {
        for c in CodecKind::ALL {
            assert_eq!(CodecKind::from_id(c.id()), Some(c));
            assert_eq!(CodecKind::parse(c.name()), Some(c));
        }
        assert_eq!(CodecKind::from_id(4), None);
    }
}
