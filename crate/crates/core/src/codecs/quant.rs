use super::payload::{Mask, Payload};
use super::{CodecConfig, CodecError, CodecKind, SignMode};
use crate::scalar::Scalar;
use crate::tensor::{SeededRng, Tensor};
use crate::wire::PackedFields;

/// Level `code` of the uniform grid over `[lo, hi]` with `levels + 1` points.
#[inline]
pub fn qu_reconstruct<T: Scalar>(code: u32, lo: T, hi: T, levels: u32) -> T {
    T::lit(code as f64) * (hi - lo) / T::lit(levels as f64) + lo
}

/// Uniform `q`-bit quantization over `[min(x), max(x)]`.
///
/// Deterministic mode maps each value to the nearest of the `2^q` levels,
/// ties toward the higher code. With stochastic rounding the value rounds up
/// with probability equal to its fractional position between levels. A
/// constant input stores its value as both range ends and all-zero codes.
pub fn qu_encode<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Payload<T>, CodecError> {
    cfg.expect(CodecKind::Qu)?;
    let values = x.data();
    let q = cfg.quant_bits;
    let levels = (1u32 << q) - 1;
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);

    let mut codes = PackedFields::zeroed(q, values.len());
    if hi > lo {
        let span = (hi - lo).as_f64();
        let mut rng = cfg.stochastic_rounding.then(|| SeededRng::new(cfg.seed));
        for (i, &v) in values.iter().enumerate() {
            let pos = (v - lo).as_f64() * levels as f64 / span;
            let code = match rng.as_mut() {
                Some(rng) => {
                    let floor = pos.floor();
                    let up = rng.uniform() < pos - floor;
                    (floor + if up { 1.0 } else { 0.0 }).clamp(0.0, levels as f64) as u32
                }
                None => nearest_code(pos, levels),
            };
            codes.set(i, code);
        }
    }

    Ok(Payload {
        codec: CodecKind::Qu,
        shape: x.shape().to_vec(),
        k: 0,
        mask_bits: 0,
        quant_bits: q,
        sign_mode: SignMode::NonNegativeOnly,
        top_values: Vec::new(),
        mask: Mask::Fields(codes),
        quant_range: Some((lo, hi)),
    })
}

/// Nearest level to the grid position `pos`, ties toward the higher code.
fn nearest_code(pos: f64, levels: u32) -> u32 {
    (pos + 0.5).floor().clamp(0.0, levels as f64) as u32
}
