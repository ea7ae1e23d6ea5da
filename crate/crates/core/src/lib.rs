//! Dictionary compressor: fragments found by a look-ahead window search are
//! assigned dense dictionary indexes, and the index stream is range-coded
//! under adaptive order-2/1/0 index contexts.

pub mod bench;
pub mod codec;
pub mod container;
pub mod context_model;
pub mod dictionary;
pub mod error;
pub mod freq;
pub mod optimizer;
pub mod range_coder;
mod util;
pub mod window_search;

pub use codec::{compress, compress_with_stats, decompress, CompressionStats, Event};
pub use error::{Error, Result};
pub use window_search::SearchParams;
