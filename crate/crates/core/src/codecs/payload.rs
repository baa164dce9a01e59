use super::ms::ms_reconstruct;
use super::quant::qu_reconstruct;
use super::{CodecError, CodecKind, SignMode};
use crate::scalar::Scalar;
use crate::tensor::{shape_len, Tensor};
use crate::wire::PackedFields;

/// Where the retained values sit in the decoded tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Mask {
    /// One packed field per element: MS sentinel/level codes, SP/RT
    /// selection bits or QU level codes.
    Fields(PackedFields),
    /// Ascending positions of the retained values (key-value storage for
    /// very sparse SP/RT payloads).
    Indices(Vec<usize>),
}

/// Compressed form of one feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload<T> {
    pub codec: CodecKind,
    pub shape: Vec<usize>,
    /// Number of retained top values (0 for QU).
    pub k: usize,
    /// MS mask bit width `b`; 0 for the other codecs.
    pub mask_bits: u8,
    /// QU bit width `q`; 0 for the other codecs.
    pub quant_bits: u8,
    pub sign_mode: SignMode,
    /// Retained values in ascending index order.
    pub top_values: Vec<T>,
    pub mask: Mask,
    /// QU `(range_min, range_max)`.
    pub quant_range: Option<(T, T)>,
}

impl<T: Scalar> Payload<T> {
    /// Flat element count `d` of the encoded tensor.
    pub fn len(&self) -> usize {
        shape_len(&self.shape).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest retained magnitude, the MS reconstruction scale.
    pub fn top_min(&self) -> Option<T> {
        self.top_values
            .iter()
            .map(|v| v.abs())
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))))
    }

    pub fn is_key_value(&self) -> bool {
        matches!(self.mask, Mask::Indices(_))
    }

    /// Width in bits of one mask field (0 for key-value payloads).
    pub fn field_width(&self) -> u8 {
        match &self.mask {
            Mask::Fields(f) => f.width(),
            Mask::Indices(_) => 0,
        }
    }

    /// Same payload with values converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Payload<U> {
        Payload {
            codec: self.codec,
            shape: self.shape.clone(),
            k: self.k,
            mask_bits: self.mask_bits,
            quant_bits: self.quant_bits,
            sign_mode: self.sign_mode,
            top_values: self.top_values.iter().map(|v| U::lit(v.as_f64())).collect(),
            mask: self.mask.clone(),
            quant_range: self
                .quant_range
                .map(|(lo, hi)| (U::lit(lo.as_f64()), U::lit(hi.as_f64()))),
        }
    }
}

fn corrupt(msg: impl Into<String>) -> CodecError {
    CodecError::Corrupt(msg.into())
}

fn fields_of<T>(p: &Payload<T>, width: u8, d: usize) -> Result<&PackedFields, CodecError> {
    match &p.mask {
        Mask::Fields(f) if f.width() == width && f.len() == d => Ok(f),
        Mask::Fields(f) => Err(corrupt(format!(
            "mask has {} fields of {} bits, expected {d} of {width}",
            f.len(),
            f.width()
        ))),
        Mask::Indices(_) => Err(corrupt(format!("{} payload cannot use key-value storage", p.codec))),
    }
}

/// Reconstructs the dense tensor from any payload.
pub fn decode<T: Scalar>(p: &Payload<T>) -> Result<Tensor<T>, CodecError> {
    if p.shape.is_empty() || p.shape.contains(&0) {
        return Err(corrupt(format!("invalid shape {:?}", p.shape)));
    }
    let d = shape_len(&p.shape).ok_or_else(|| corrupt("shape overflows"))?;
    if p.top_values.len() != p.k {
        return Err(corrupt(format!(
            "header declares k = {} but {} top values are present",
            p.k,
            p.top_values.len()
        )));
    }
    let data = match p.codec {
        CodecKind::Ms => decode_ms(p, d)?,
        CodecKind::Sp | CodecKind::Rt => decode_sparse(p, d)?,
        CodecKind::Qu => decode_qu(p, d)?,
    };
    Ok(Tensor::new(p.shape.clone(), data)?)
}

fn decode_ms<T: Scalar>(p: &Payload<T>, d: usize) -> Result<Vec<T>, CodecError> {
    let b = p.mask_bits;
    if !(1..=super::MAX_BITS).contains(&b) {
        return Err(corrupt(format!("mask bit width {b} out of range")));
    }
    let signed = p.sign_mode == SignMode::SignBit;
    let fields = fields_of(p, b + u8::from(signed), d)?;
    let levels = (1u32 << b) - 1;
    let sentinels = fields.iter().filter(|f| f & levels == levels).count();
    if sentinels != p.k {
        return Err(corrupt(format!(
            "{sentinels} sentinel fields but {} top values",
            p.k
        )));
    }
    let top_min = p.top_min().ok_or_else(|| corrupt("MS payload without top values"))?;
    let mut tops = p.top_values.iter();
    let mut out = Vec::with_capacity(d);
    for f in fields.iter() {
        let code = f & levels;
        if code == levels {
            out.push(*tops.next().expect("sentinel count checked"));
        } else {
            let mag = ms_reconstruct(code, top_min, levels);
            let negative = signed && (f >> b) & 1 == 1;
            out.push(if negative { -mag } else { mag });
        }
    }
    Ok(out)
}

fn decode_sparse<T: Scalar>(p: &Payload<T>, d: usize) -> Result<Vec<T>, CodecError> {
    let mut out = vec![T::zero(); d];
    match &p.mask {
        Mask::Fields(_) => {
            let bits = fields_of(p, 1, d)?;
            let set = bits.iter().filter(|&b| b == 1).count();
            if set != p.k {
                return Err(corrupt(format!("{set} mask bits set but {} top values", p.k)));
            }
            let mut tops = p.top_values.iter();
            for (i, bit) in bits.iter().enumerate() {
                if bit == 1 {
                    out[i] = *tops.next().expect("popcount checked");
                }
            }
        }
        Mask::Indices(idx) => {
            if idx.len() != p.k {
                return Err(corrupt(format!("{} indices but {} top values", idx.len(), p.k)));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) || idx.last().is_some_and(|&i| i >= d) {
                return Err(corrupt("indices must be strictly increasing and below d"));
            }
            for (&i, &v) in idx.iter().zip(&p.top_values) {
                out[i] = v;
            }
        }
    }
    Ok(out)
}

fn decode_qu<T: Scalar>(p: &Payload<T>, d: usize) -> Result<Vec<T>, CodecError> {
    let q = p.quant_bits;
    if !(1..=super::MAX_BITS).contains(&q) {
        return Err(corrupt(format!("quantization bit width {q} out of range")));
    }
    if p.k != 0 {
        return Err(corrupt("QU payload carries top values"));
    }
    let (lo, hi) = p.quant_range.ok_or_else(|| corrupt("QU payload without range"))?;
    if lo > hi {
        return Err(corrupt("QU range minimum exceeds maximum"));
    }
    let fields = fields_of(p, q, d)?;
    let levels = (1u32 << q) - 1;
    Ok(fields.iter().map(|c| qu_reconstruct(c, lo, hi, levels)).collect())
}
