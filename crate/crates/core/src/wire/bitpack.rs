//! Fixed-width unsigned fields packed LSB-first.
//!
//! Field `i` of width `w` occupies global bit positions `i·w .. (i+1)·w`;
//! bit `j` of the field lands at global position `i·w + j`, which is bit
//! `(i·w + j) % 8` of byte `(i·w + j) / 8`. Padding bits in the final byte
//! are always zero.

/// Widest field the packer supports.
pub const MAX_FIELD_WIDTH: u8 = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedFields {
    width: u8,
    len: usize,
    bytes: Vec<u8>,
}

/// Bytes needed for `len` fields of `width` bits.
pub fn packed_len(len: usize, width: u8) -> usize {
    (len * width as usize).div_ceil(8)
}

impl PackedFields {
    pub fn zeroed(width: u8, len: usize) -> Self {
        assert!(
            (1..=MAX_FIELD_WIDTH).contains(&width),
            "field width {width} outside 1..={MAX_FIELD_WIDTH}"
        );
        Self {
            width,
            len,
            bytes: vec![0; packed_len(len, width)],
        }
    }

    /// Wraps already-packed bytes. Returns `None` when the byte count does
    /// not match or a padding bit is set.
    pub fn from_bytes(width: u8, len: usize, bytes: Vec<u8>) -> Option<Self> {
        if !(1..=MAX_FIELD_WIDTH).contains(&width) || bytes.len() != packed_len(len, width) {
            return None;
        }
        let used_bits = len * width as usize;
        if !used_bits.is_multiple_of(8) {
            let last = *bytes.last()?;
            if last >> (used_bits % 8) != 0 {
                return None;
            }
        }
        Some(Self { width, len, bytes })
    }

    pub fn from_values(width: u8, values: impl ExactSizeIterator<Item = u32>) -> Self {
        let mut packed = Self::zeroed(width, values.len());
        for (i, v) in values.enumerate() {
            packed.set(i, v);
        }
        packed
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn field_mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    pub fn get(&self, i: usize) -> u32 {
        assert!(i < self.len, "field {i} out of range {}", self.len);
        let start = i * self.width as usize;
        let first = start / 8;
        let shift = start % 8;
        let mut window = 0u64;
        let span = (shift + self.width as usize).div_ceil(8);
        for (j, byte) in self.bytes[first..first + span].iter().enumerate() {
            window |= (*byte as u64) << (8 * j);
        }
        ((window >> shift) & self.field_mask()) as u32
    }

    /// Overwrites field `i`. Bits of `value` beyond the width are an error.
    pub fn set(&mut self, i: usize, value: u32) {
        assert!(i < self.len, "field {i} out of range {}", self.len);
        assert!(
            (value as u64) <= self.field_mask(),
            "value {value} does not fit in {} bits",
            self.width
        );
        let start = i * self.width as usize;
        let first = start / 8;
        let shift = start % 8;
        let span = (shift + self.width as usize).div_ceil(8);
        let clear = !(self.field_mask() << shift);
        let bits = (value as u64) << shift;
        for j in 0..span {
            let b = &mut self.bytes[first + j];
            *b = (*b & (clear >> (8 * j)) as u8) | (bits >> (8 * j)) as u8;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}
