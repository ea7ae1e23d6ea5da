use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic bytes: not an x3 container")]
    BadMagic,

    #[error("unsupported container version {0:#04x}")]
    UnsupportedVersion(u8),

    #[error("malformed length varint")]
    BadVarint,

    #[error("coded payload truncated")]
    Truncated,

    #[error("coded payload is inconsistent with its model")]
    CorruptPayload,

    #[error("{0} trailing bytes after coded payload")]
    TrailingData(usize),

    #[error("dictionary reference {index} out of range (dictionary holds {size})")]
    InvalidIndex { index: usize, size: usize },

    #[error("raw fragment length {0} is invalid")]
    InvalidLength(usize),

    #[error("decoded output overruns declared length {declared}")]
    Overrun { declared: u64 },

    #[error("dictionary capacity of {cap} fragments exceeded")]
    DictionaryFull { cap: usize },

    #[error("fragment already present in dictionary at index {0}")]
    DuplicateFragment(usize),

    #[error("empty fragments cannot be stored")]
    EmptyFragment,

    #[error("interval [{lo}, {hi}) of {total} violates coder precision")]
    BadInterval { lo: u32, hi: u32, total: u32 },

    #[error("roundtrip mismatch on {0}")]
    RoundtripMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    /// True for every error that signals a damaged or foreign input stream.
    pub fn is_corrupt_stream(&self) -> bool {
        matches!(
            self,
            Error::BadMagic
                | Error::UnsupportedVersion(_)
                | Error::BadVarint
                | Error::Truncated
                | Error::CorruptPayload
                | Error::TrailingData(_)
                | Error::InvalidIndex { .. }
                | Error::InvalidLength(_)
                | Error::Overrun { .. }
        )
    }
}
