//! Container framing: `"x3"`, a version byte, the original length as an
//! unsigned LEB128 varint, then the range-coded event stream.

use crate::error::{Error, Result};

pub const MAGIC: [u8; 2] = [0x78, 0x33];
pub const VERSION: u8 = 0x01;

pub fn encode_varint(mut n: u64, out: &mut Vec<u8>) {
    while n >= 0x80 {
        out.push((n as u8) | 0x80);
        n >>= 7;
    }
    out.push(n as u8);
}

/// Decodes a varint from the front of `bytes`; returns the value and the
/// number of bytes read.
pub fn decode_varint(bytes: &[u8]) -> Result<(u64, usize)> {
    let mut value = 0u64;
    for (i, &b) in bytes.iter().enumerate().take(10) {
        let chunk = u64::from(b & 0x7F);
        let shift = 7 * i as u32;
        if shift == 63 && chunk > 1 {
            return Err(Error::BadVarint);
        }
        value |= chunk << shift;
        if b & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    Err(Error::BadVarint)
}

pub fn write_header(original_len: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    encode_varint(original_len, &mut out);
    out
}

/// Parses the header; returns the original length and the payload.
pub fn read_header(data: &[u8]) -> Result<(u64, &[u8])> {
    if data.len() < 2 || data[..2] != MAGIC {
        return Err(Error::BadMagic);
    }
    match data.get(2) {
        Some(&VERSION) => {}
        Some(&v) => return Err(Error::UnsupportedVersion(v)),
        None => return Err(Error::Truncated),
    }
    let (len, used) = decode_varint(&data[3..])?;
    Ok((len, &data[3 + used..]))
}
