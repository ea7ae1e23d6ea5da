//! Byte-oriented range coder.
//!
//! 32-bit range, 64-bit low accumulator with carry propagation through a
//! cached byte and a run of pending `0xFF` bytes. Symbol intervals are given
//! as cumulative frequencies `[cum_lo, cum_hi)` out of `total`, with
//! `total < 2^22` so that `range / total` never falls below 4 after
//! normalization.
//!
//! The decoder consumes exactly as many bytes as the encoder produced: reading
//! past the end is a truncation error, and leftover input is reported by
//! [`Decoder::finish`].

use crate::error::{Error, Result};

/// Largest admissible frequency total (exclusive).
pub const MAX_TOTAL: u32 = 1 << 22;

const TOP: u32 = 1 << 24;

#[inline]
fn check_interval(cum_lo: u32, cum_hi: u32, total: u32) -> Result<()> {
    if cum_lo < cum_hi && cum_hi <= total && total < MAX_TOTAL {
        Ok(())
    } else {
        Err(Error::BadInterval {
            lo: cum_lo,
            hi: cum_hi,
            total,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Self::with_output(Vec::new())
    }

    /// Appends coded bytes to `out` (e.g. after an already written header).
    pub fn with_output(out: Vec<u8>) -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out,
        }
    }

    pub fn encode(&mut self, cum_lo: u32, cum_hi: u32, total: u32) -> Result<()> {
        check_interval(cum_lo, cum_hi, total)?;
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum_lo);
        self.range = r * (cum_hi - cum_lo);
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
        Ok(())
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Bytes emitted so far (excluding bytes still held for carry resolution).
    pub fn bytes_written(&self) -> usize {
        self.out.len()
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        let mut dec = Self {
            code: 0,
            range: u32::MAX,
            input,
            pos: 0,
        };
        // The encoder's first byte is the initial zero cache; no carry can reach it.
        if dec.next_byte()? != 0 {
            return Err(Error::CorruptPayload);
        }
        for _ in 0..4 {
            dec.code = (dec.code << 8) | u32::from(dec.next_byte()?);
        }
        Ok(dec)
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let byte = *self.input.get(self.pos).ok_or(Error::Truncated)?;
        self.pos += 1;
        Ok(byte)
    }

    /// Returns the scaled value in `[0, total)` locating the next symbol.
    /// Must be followed by [`Decoder::confirm`] with the same `total`.
    pub fn decode_freq(&mut self, total: u32) -> Result<u32> {
        if total == 0 || total >= MAX_TOTAL {
            return Err(Error::BadInterval { lo: 0, hi: 0, total });
        }
        let value = self.code / (self.range / total);
        if value >= total {
            return Err(Error::CorruptPayload);
        }
        Ok(value)
    }

    pub fn confirm(&mut self, cum_lo: u32, cum_hi: u32, total: u32) -> Result<()> {
        check_interval(cum_lo, cum_hi, total)?;
        let r = self.range / total;
        let offset = r * cum_lo;
        if self.code < offset {
            return Err(Error::CorruptPayload);
        }
        self.code -= offset;
        self.range = r * (cum_hi - cum_lo);
        if self.code >= self.range {
            return Err(Error::CorruptPayload);
        }
        while self.range < TOP {
            self.code = (self.code << 8) | u32::from(self.next_byte()?);
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Verifies that the whole input was consumed.
    pub fn finish(self) -> Result<()> {
        match self.input.len() - self.pos {
            0 => Ok(()),
            n => Err(Error::TrailingData(n)),
        }
    }
}
