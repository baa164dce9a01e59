use super::{CodecConfig, CodecError, CodecKind, SignMode, FLOAT_BITS};
use crate::scalar::Scalar;
use crate::tensor::{l2_norm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `‖x̂ − x‖₂`
    pub abs_error: f64,
    /// `abs_error / ‖x‖₂`, zero when `x = 0`.
    pub rel_error: f64,
    /// Filled in by the caller from the codec configuration.
    pub compression_rate: f64,
}

impl ErrorReport {
    pub fn with_rate(mut self, rate: f64) -> Self {
        self.compression_rate = rate;
        self
    }
}

pub fn compression_error<T: Scalar>(x: &Tensor<T>, decoded: &Tensor<T>) -> Result<ErrorReport, CodecError> {
    let abs_error = x.distance(decoded)?.as_f64();
    let norm = l2_norm(x.data()).as_f64();
    Ok(ErrorReport {
        abs_error,
        rel_error: if norm > 0.0 { abs_error / norm } else { 0.0 },
        compression_rate: 0.0,
    })
}

/// Compressed size in bits, header excluded:
/// MS `b·d + f·k` (plus `d` sign bits), SP/RT `d + f·k`, QU `q·d`.
pub fn compressed_bits(cfg: &CodecConfig, d: usize) -> Result<u64, CodecError> {
    cfg.validate()?;
    let d64 = d as u64;
    Ok(match cfg.codec {
        CodecKind::Ms => {
            let k = cfg.retained(d)? as u64;
            let sign = if cfg.sign_mode == SignMode::SignBit { d64 } else { 0 };
            cfg.mask_bits as u64 * d64 + FLOAT_BITS * k + sign
        }
        CodecKind::Sp | CodecKind::Rt => {
            let k = cfg.retained(d)? as u64;
            d64 + FLOAT_BITS * k
        }
        CodecKind::Qu => cfg.quant_bits as u64 * d64,
    })
}

/// `1 − compressed_bits / (f·d)`.
pub fn compression_rate(cfg: &CodecConfig, d: usize) -> Result<f64, CodecError> {
    let bits = compressed_bits(cfg, d)?;
    Ok(1.0 - bits as f64 / (FLOAT_BITS * d as u64) as f64)
}
