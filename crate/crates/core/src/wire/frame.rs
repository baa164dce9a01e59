//! Frame layout, all integers and reals little-endian:
//!
//! | bytes          | field                                              |
//! |----------------|----------------------------------------------------|
//! | 4              | magic `MSC1`                                       |
//! | 1              | codec id (0 MS, 1 SP, 2 QU, 3 RT)                  |
//! | 1              | flags: bit 0 sign bit (MS), bit 1 key-value (SP/RT) |
//! | 1              | `b` for MS, `q` for QU, 0 for SP/RT                |
//! | 1              | ndims                                              |
//! | 4 · ndims      | dims, u32                                          |
//! | 4              | k, u32                                             |
//! | 8 (QU only)    | range min, range max, f32                          |
//! | mask section   | `ceil(d·w/8)` packed fields, or `4·k` u32 indices  |
//! | 4 · k          | top values, f32                                    |

use thiserror::Error;

use super::bitpack::{packed_len, PackedFields};
use crate::codecs::{CodecKind, Mask, Payload, SignMode, MAX_BITS};

pub const MAGIC: [u8; 4] = *b"MSC1";
pub const FLAG_SIGN_BIT: u8 = 0b01;
pub const FLAG_KEY_VALUE: u8 = 0b10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("[W01] bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("[W02] unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("[W03] invalid flags {flags:#04b} for {codec}")]
    InvalidFlags { codec: CodecKind, flags: u8 },
    #[error("[W04] invalid bit width {width} for {codec}")]
    InvalidBitWidth { codec: CodecKind, width: u8 },
    #[error("[W05] invalid shape: {0}")]
    InvalidShape(String),
    #[error("[W06] invalid k = {k} for {codec} with d = {d}")]
    InvalidCount { codec: CodecKind, k: u64, d: u64 },
    #[error("[W07] truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("[W08] {0} trailing bytes after frame")]
    TrailingBytes(u64),
    #[error("[W09] non-zero padding bits in mask")]
    NonzeroPadding,
    #[error("[W10] mask marks {found} retained positions but k = {expected}")]
    SentinelMismatch { expected: u64, found: u64 },
    #[error("[W11] key-value indices must be strictly increasing and below d")]
    InvalidIndex,
    #[error("[W12] invalid value: {0}")]
    InvalidValue(String),
    #[error("[W13] payload cannot be encoded: {0}")]
    Unencodable(String),
}

impl WireError {
    /// Stable error code, e.g. `"W07"`.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::BadMagic(_) => "W01",
            WireError::UnknownCodec(_) => "W02",
            WireError::InvalidFlags { .. } => "W03",
            WireError::InvalidBitWidth { .. } => "W04",
            WireError::InvalidShape(_) => "W05",
            WireError::InvalidCount { .. } => "W06",
            WireError::Truncated { .. } => "W07",
            WireError::TrailingBytes(_) => "W08",
            WireError::NonzeroPadding => "W09",
            WireError::SentinelMismatch { .. } => "W10",
            WireError::InvalidIndex => "W11",
            WireError::InvalidValue(_) => "W12",
            WireError::Unencodable(_) => "W13",
        }
    }
}

/// Fixed header size: everything before the mask section.
pub fn header_len(ndims: usize, codec: CodecKind) -> usize {
    8 + 4 * ndims + 4 + if codec == CodecKind::Qu { 8 } else { 0 }
}

fn mask_section_len<T>(p: &Payload<T>) -> usize {
    match &p.mask {
        Mask::Fields(f) => f.bytes().len(),
        Mask::Indices(idx) => 4 * idx.len(),
    }
}

/// Exact serialized length of `p`, whatever its scalar type; values always
/// travel as 32-bit reals.
pub fn frame_len<T>(p: &Payload<T>) -> usize {
    header_len(p.shape.len(), p.codec) + mask_section_len(p) + 4 * p.top_values.len()
}

fn width_byte<T>(p: &Payload<T>) -> u8 {
    match p.codec {
        CodecKind::Ms => p.mask_bits,
        CodecKind::Qu => p.quant_bits,
        CodecKind::Sp | CodecKind::Rt => 0,
    }
}

fn flags_byte<T>(p: &Payload<T>) -> u8 {
    let mut flags = 0;
    if p.sign_mode == SignMode::SignBit {
        flags |= FLAG_SIGN_BIT;
    }
    if matches!(p.mask, Mask::Indices(_)) {
        flags |= FLAG_KEY_VALUE;
    }
    flags
}

pub fn serialize(p: &Payload<f32>) -> Result<Vec<u8>, WireError> {
    let ndims = u8::try_from(p.shape.len())
        .map_err(|_| WireError::Unencodable(format!("{} dimensions exceed 255", p.shape.len())))?;
    let k = u32::try_from(p.k).map_err(|_| WireError::Unencodable(format!("k = {} exceeds u32", p.k)))?;
    let mut out = Vec::with_capacity(frame_len(p));
    out.extend_from_slice(&MAGIC);
    out.push(p.codec.id());
    out.push(flags_byte(p));
    out.push(width_byte(p));
    out.push(ndims);
    for &dim in &p.shape {
        let dim = u32::try_from(dim)
            .map_err(|_| WireError::Unencodable(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    out.extend_from_slice(&k.to_le_bytes());
    if p.codec == CodecKind::Qu {
        let (lo, hi) = p
            .quant_range
            .ok_or_else(|| WireError::Unencodable("QU payload without range".into()))?;
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
    }
    match &p.mask {
        Mask::Fields(f) => out.extend_from_slice(f.bytes()),
        Mask::Indices(idx) => {
            for &i in idx {
                let i = u32::try_from(i).map_err(|_| WireError::Unencodable(format!("index {i} exceeds u32")))?;
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
    }
    for v in &p.top_values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(
            WireError::Truncated {
                needed: self.pos as u64 + n as u64,
                available: self.bytes.len() as u64,
            },
        )?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses and validates a frame. Never reads beyond the length the header
/// declares, and rejects anything a conforming encoder could not produce
/// except for the mask/key-value storage choice.
pub fn deserialize(bytes: &[u8]) -> Result<Payload<f32>, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let codec_id = r.u8()?;
    let codec = CodecKind::from_id(codec_id).ok_or(WireError::UnknownCodec(codec_id))?;
    let flags = r.u8()?;
    let width_param = r.u8()?;
    let ndims = r.u8()? as usize;

    let allowed_flags = match codec {
        CodecKind::Ms => FLAG_SIGN_BIT,
        CodecKind::Sp | CodecKind::Rt => FLAG_KEY_VALUE,
        CodecKind::Qu => 0,
    };
    if flags & !allowed_flags != 0 {
        return Err(WireError::InvalidFlags { codec, flags });
    }
    let sign_mode = if flags & FLAG_SIGN_BIT != 0 {
        SignMode::SignBit
    } else {
        SignMode::NonNegativeOnly
    };
    let key_value = flags & FLAG_KEY_VALUE != 0;

    let width_ok = match codec {
        CodecKind::Ms | CodecKind::Qu => (1..=MAX_BITS).contains(&width_param),
        CodecKind::Sp | CodecKind::Rt => width_param == 0,
    };
    if !width_ok {
        return Err(WireError::InvalidBitWidth {
            codec,
            width: width_param,
        });
    }

    if ndims == 0 {
        return Err(WireError::InvalidShape("zero dimensions".into()));
    }
    let mut shape = Vec::with_capacity(ndims);
    let mut d: u64 = 1;
    for _ in 0..ndims {
        let dim = r.u32()?;
        if dim == 0 {
            return Err(WireError::InvalidShape("zero-length dimension".into()));
        }
        d = d
            .checked_mul(dim as u64)
            .filter(|&d| d <= u32::MAX as u64)
            .ok_or_else(|| WireError::InvalidShape("element count exceeds u32".into()))?;
        shape.push(dim as usize);
    }
    let k = r.u32()? as u64;
    let k_ok = match codec {
        CodecKind::Qu => k == 0,
        _ => (1..=d).contains(&k),
    };
    if !k_ok {
        return Err(WireError::InvalidCount { codec, k, d });
    }

    let field_width = match codec {
        CodecKind::Ms => width_param + u8::from(sign_mode == SignMode::SignBit),
        CodecKind::Qu => width_param,
        CodecKind::Sp | CodecKind::Rt => 1,
    };
    let header = header_len(ndims, codec) as u64;
    let mask_bytes = if key_value {
        4 * k
    } else {
        (d * field_width as u64).div_ceil(8)
    };
    let total = header + mask_bytes + 4 * k;
    let available = bytes.len() as u64;
    if total > available {
        return Err(WireError::Truncated {
            needed: total,
            available,
        });
    }
    if total < available {
        return Err(WireError::TrailingBytes(available - total));
    }
    let d = d as usize;
    let k = k as usize;

    let quant_range = if codec == CodecKind::Qu {
        let lo = r.f32()?;
        let hi = r.f32()?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(WireError::InvalidValue(format!("QU range [{lo}, {hi}]")));
        }
        Some((lo, hi))
    } else {
        None
    };

    let mask = if key_value {
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            let i = r.u32()? as usize;
            if i >= d || idx.last().is_some_and(|&prev| prev >= i) {
                return Err(WireError::InvalidIndex);
            }
            idx.push(i);
        }
        Mask::Indices(idx)
    } else {
        let raw = r.take(packed_len(d, field_width))?.to_vec();
        let fields = PackedFields::from_bytes(field_width, d, raw).ok_or(WireError::NonzeroPadding)?;
        check_fields(codec, sign_mode, width_param, k, &fields)?;
        Mask::Fields(fields)
    };

    let mut top_values = Vec::with_capacity(k);
    for _ in 0..k {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(WireError::InvalidValue(format!("non-finite top value {v}")));
        }
        if codec == CodecKind::Ms && sign_mode == SignMode::NonNegativeOnly && v < 0.0 {
            return Err(WireError::InvalidValue(format!(
                "negative top value {v} in non-negative MS frame"
            )));
        }
        top_values.push(v);
    }
    debug_assert_eq!(r.pos, bytes.len());

    Ok(Payload {
        codec,
        shape,
        k,
        mask_bits: if codec == CodecKind::Ms { width_param } else { 0 },
        quant_bits: if codec == CodecKind::Qu { width_param } else { 0 },
        sign_mode,
        top_values,
        mask,
        quant_range,
    })
}

fn check_fields(
    codec: CodecKind,
    sign_mode: SignMode,
    b: u8,
    k: usize,
    fields: &PackedFields,
) -> Result<(), WireError> {
    let found = match codec {
        CodecKind::Ms => {
            let levels = (1u32 << b) - 1;
            let mut sentinels = 0usize;
            for f in fields.iter() {
                let code = f & levels;
                if code == levels {
                    sentinels += 1;
                }
                let sign = sign_mode == SignMode::SignBit && (f >> b) & 1 == 1;
                if sign && (code == 0 || code == levels) {
                    return Err(WireError::InvalidValue(
                        "sign bit set on a zero or sentinel MS field".into(),
                    ));
                }
            }
            sentinels
        }
        CodecKind::Sp | CodecKind::Rt => fields.iter().filter(|&v| v == 1).count(),
        CodecKind::Qu => return Ok(()),
    };
    if found != k {
        return Err(WireError::SentinelMismatch {
            expected: k as u64,
            found: found as u64,
        });
    }
    Ok(())
}
