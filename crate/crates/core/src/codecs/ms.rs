use super::payload::{Mask, Payload};
use super::select::select_top_k;
use super::{CodecConfig, CodecError, CodecKind, SignMode};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::wire::PackedFields;

/// Value a non-sentinel MS code decodes to: `code · Top_min / (2^b − 1)`.
#[inline]
pub fn ms_reconstruct<T: Scalar>(code: u32, top_min: T, levels: u32) -> T {
    T::lit(code as f64) * top_min / T::lit(levels as f64)
}

/// Largest code in `0..=levels−1` whose reconstruction does not exceed
/// `magnitude`, i.e. `floor(magnitude · levels / top_min)` clamped below the
/// sentinel. The search is done against [`ms_reconstruct`] so the decoded
/// value never overshoots the input, whatever the rounding of the quotient.
fn filtered_code<T: Scalar>(magnitude: T, top_min: T, levels: u32) -> u32 {
    if top_min <= T::zero() {
        return 0;
    }
    let estimate = (magnitude * T::lit(levels as f64) / top_min).floor().as_f64();
    let mut code = estimate.clamp(0.0, (levels - 1) as f64) as u32;
    while code > 0 && ms_reconstruct(code, top_min, levels) > magnitude {
        code -= 1;
    }
    while code + 1 < levels && ms_reconstruct(code + 1, top_min, levels) <= magnitude {
        code += 1;
    }
    code
}

/// Mask-encoded sparsification.
///
/// Keeps the `k` largest-magnitude values in index order. Each retained
/// position gets the all-ones sentinel `2^b − 1`; every other position gets
/// the `b`-bit code of its magnitude on the grid `{0, 1, …, 2^b − 2} ·
/// Top_min / (2^b − 1)`, rounded down. With [`SignMode::SignBit`] an extra
/// most-significant bit per field records a negative filtered value.
pub fn ms_encode<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Payload<T>, CodecError> {
    cfg.expect(CodecKind::Ms)?;
    let values = x.data();
    let d = values.len();
    let k = cfg.retained(d)?;
    let signed = cfg.sign_mode == SignMode::SignBit;
    if !signed {
        if let Some(index) = values.iter().position(|v| *v < T::zero()) {
            return Err(CodecError::NegativeInput { index });
        }
    }

    let selected = select_top_k(values, k)?;
    let b = cfg.mask_bits;
    let levels = (1u32 << b) - 1;
    let top_values: Vec<T> = selected.iter().map(|&i| values[i]).collect();
    let top_min = top_values
        .iter()
        .map(|v| v.abs())
        .fold(T::infinity(), |a, v| a.min(v));

    let mut fields = PackedFields::zeroed(cfg.field_width(), d);
    let mut next_selected = selected.iter().copied().peekable();
    for (i, &v) in values.iter().enumerate() {
        if next_selected.peek() == Some(&i) {
            next_selected.next();
            fields.set(i, levels);
            continue;
        }
        let code = filtered_code(v.abs(), top_min, levels);
        let sign = if signed && code > 0 && v < T::zero() {
            1 << b
        } else {
            0
        };
        fields.set(i, code | sign);
    }

    Ok(Payload {
        codec: CodecKind::Ms,
        shape: x.shape().to_vec(),
        k,
        mask_bits: b,
        quant_bits: 0,
        sign_mode: cfg.sign_mode,
        top_values,
        mask: Mask::Fields(fields),
        quant_range: None,
    })
}
