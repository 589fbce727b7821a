//! Bit-level writer/reader with Exp-Golomb codes.
//!
//! Unsigned values use `ue(v)`: `len(v+1) - 1` zero bits followed by `v + 1`
//! in binary. Signed values map through `v -> 2|v| - [v > 0]` first, so
//! `0, 1, -1, 2, -2` become `0, 1, 2, 3, 4`.

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    filled: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | u8::from(bit);
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.filled = 0;
        }
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn put_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    pub fn put_ue(&mut self, v: u32) {
        let code = u64::from(v) + 1;
        let len = 64 - code.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(code, len);
    }

    pub fn put_se(&mut self, v: i32) {
        self.put_ue(signed_to_unsigned(v));
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + usize::from(self.filled)
    }

    /// Zero-pads to the next byte boundary and returns the bytes.
    pub fn finish(mut self) -> Vec<u8> {
        while self.filled != 0 {
            self.put_bit(false);
        }
        self.bytes
    }
}

#[inline]
pub fn signed_to_unsigned(v: i32) -> u32 {
    let mag = v.unsigned_abs();
    if v > 0 {
        2 * mag - 1
    } else {
        2 * mag
    }
}

#[inline]
pub fn unsigned_to_signed(u: u32) -> i32 {
    if u % 2 == 1 {
        u.div_ceil(2) as i32
    } else {
        -((u / 2) as i32)
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    /// Absolute offset of `data[0]` for error reports.
    base: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8], base: usize) -> Self {
        BitReader { data, pos: 0, base }
    }

    pub fn byte_offset(&self) -> usize {
        self.base + self.pos / 8
    }

    fn corrupt(&self, reason: &str) -> Error {
        Error::CorruptUnit { offset: self.byte_offset(), reason: reason.to_string() }
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = *self.data.get(self.pos / 8).ok_or_else(|| self.corrupt("ran past end of payload"))?;
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u32> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(self.corrupt("exp-golomb prefix longer than 32 bits"));
            }
        }
        let rest = self.read_bits(zeros)?;
        let v = ((1u64 << zeros) | rest) - 1;
        u32::try_from(v).map_err(|_| self.corrupt("exp-golomb value overflows u32"))
    }

    pub fn read_se(&mut self) -> Result<i32> {
        let u = self.read_ue()?;
        if u > i32::MAX as u32 {
            return Err(self.corrupt("signed exp-golomb value overflows i32"));
        }
        Ok(unsigned_to_signed(u))
    }
}
