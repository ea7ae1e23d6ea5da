//! Compression and decompression of whole buffers.
//!
//! The encoder walks the input once. At each position it asks the dictionary
//! for the longest stored fragment matching there and the window searcher for
//! the length of a fresh fragment. A dictionary hit at least as long as the
//! fresh candidate is coded as a reference; otherwise the candidate is coded
//! raw (length, then bytes) and appended to the dictionary. The decoder needs
//! no search parameters: it replays references and raw fragments, growing
//! the dictionary exactly as the encoder did.

use std::time::Instant;

use serde::Serialize;

use crate::container::{read_header, write_header};
use crate::context_model::{ContextModel, Symbol, MAX_INDEXES};
use crate::dictionary::FragmentDict;
use crate::error::{Error, Result};
use crate::freq::FreqTable;
use crate::range_coder::{Decoder, Encoder};
use crate::window_search::{SearchParams, WindowSearcher, MAX_MATCH_LEN_LIMIT};

/// Rescale bound for the raw-length and raw-byte tables.
const RAW_LIMIT: u32 = 1 << 16;
const RAW_INCREMENT: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event<'a> {
    DictRef { index: usize, len: usize },
    RawFragment(&'a [u8]),
}

impl Event<'_> {
    pub fn len(&self) -> usize {
        match *self {
            Event::DictRef { len, .. } => len,
            Event::RawFragment(bytes) => bytes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Machine-readable report of one compression run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompressionStats {
    pub input_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
    pub dict_refs: u64,
    pub raw_fragments: u64,
    pub raw_bytes: u64,
    pub dictionary_entries: u64,
    pub dictionary_bytes: u64,
    pub trie_nodes: u64,
    pub order1_contexts: u64,
    pub order2_contexts: u64,
    /// Estimated heap held by the dictionary.
    pub dictionary_structure_bytes: u64,
    /// Estimated heap held by the context model.
    pub model_structure_bytes: u64,
    /// Estimated heap held by the window search index.
    pub search_index_bytes: u64,
    /// Input, output and all of the above.
    pub structure_bytes: u64,
    pub seconds: f64,
}

pub fn ratio(original: u64, compressed: u64) -> f64 {
    if compressed == 0 {
        0.0
    } else {
        original as f64 / compressed as f64
    }
}

/// Models shared by encoder and decoder.
struct StreamState {
    dict: FragmentDict,
    model: ContextModel,
    lengths: FreqTable,
    bytes: FreqTable,
}

impl StreamState {
    fn new() -> Self {
        Self {
            dict: FragmentDict::new(),
            model: ContextModel::new(),
            lengths: FreqTable::new(MAX_MATCH_LEN_LIMIT, RAW_LIMIT),
            bytes: FreqTable::new(256, RAW_LIMIT),
        }
    }

    fn digest(&self) -> (u64, u64) {
        (self.dict.content_hash(), self.model.state_hash())
    }
}

/// `(dictionary hash, model hash)` after every event.
pub type StateTrace = Vec<(u64, u64)>;

/// Compresses `input` into a container.
pub fn compress(input: &[u8], params: &SearchParams) -> Result<Vec<u8>> {
    Ok(compress_inner(input, params, |_, _| {})?.0)
}

pub fn compress_with_stats(input: &[u8], params: &SearchParams) -> Result<(Vec<u8>, CompressionStats)> {
    compress_inner(input, params, |_, _| {})
}

/// Compresses and records the dictionary and model digests after every event.
pub fn compress_traced(input: &[u8], params: &SearchParams) -> Result<(Vec<u8>, StateTrace)> {
    let mut trace = Vec::new();
    let (out, _) = compress_inner(input, params, |_, state| trace.push(state.digest()))?;
    Ok((out, trace))
}

/// Events the encoder emits for `input`, in order.
pub fn parse_events<'a>(input: &'a [u8], params: &SearchParams) -> Result<Vec<Event<'a>>> {
    let mut events = Vec::new();
    compress_inner(input, params, |ev, _| events.push(ev))?;
    Ok(events)
}

fn compress_inner<'a, F>(input: &'a [u8], params: &SearchParams, mut observe: F) -> Result<(Vec<u8>, CompressionStats)>
where
    F: FnMut(Event<'a>, &StreamState),
{
    params.validate()?;
    let started = Instant::now();
    let mut state = StreamState::new();
    let mut searcher = WindowSearcher::new(input);
    let mut enc = Encoder::with_output(write_header(input.len() as u64));
    let mut stats = CompressionStats::default();

    let mut p = 0;
    while p < input.len() {
        let remaining = input.len() - p;
        let cap = params.max_match_len.min(remaining);
        let dict_hit = state.dict.longest_match(input, p, remaining);
        let dict_len = dict_hit.map_or(0, |(_, len)| len);
        // A window candidate never exceeds `cap`, so a hit that long wins outright.
        let window_len = if dict_len >= cap {
            cap
        } else {
            searcher.search(p, params, &state.dict)
        };

        let event = match dict_hit {
            Some((index, len)) if len >= window_len => {
                state.model.encode(&mut enc, Symbol::Index(index as u32))?;
                stats.dict_refs += 1;
                Event::DictRef { index, len }
            }
            _ => {
                if state.dict.len() >= MAX_INDEXES {
                    return Err(Error::DictionaryFull { cap: MAX_INDEXES });
                }
                let fragment = &input[p..p + window_len];
                state.model.encode(&mut enc, Symbol::New)?;
                let (lo, hi) = state.lengths.interval(window_len - 1);
                enc.encode(lo, hi, state.lengths.effective_total())?;
                state.lengths.add(window_len - 1, RAW_INCREMENT);
                for &b in fragment {
                    let (lo, hi) = state.bytes.interval(usize::from(b));
                    enc.encode(lo, hi, state.bytes.effective_total())?;
                    state.bytes.add(usize::from(b), RAW_INCREMENT);
                }
                state.dict.add_fragment(fragment)?;
                stats.raw_fragments += 1;
                stats.raw_bytes += window_len as u64;
                Event::RawFragment(fragment)
            }
        };
        p += event.len();
        observe(event, &state);
    }

    let out = enc.finish();
    stats.input_bytes = input.len() as u64;
    stats.compressed_bytes = out.len() as u64;
    stats.ratio = ratio(stats.input_bytes, stats.compressed_bytes);
    stats.dictionary_entries = state.dict.len() as u64;
    stats.dictionary_bytes = state.dict.fragment_bytes() as u64;
    stats.trie_nodes = state.dict.trie_nodes() as u64;
    stats.order1_contexts = state.model.order1_instances() as u64;
    stats.order2_contexts = state.model.order2_instances() as u64;
    stats.dictionary_structure_bytes = state.dict.estimated_bytes() as u64;
    stats.model_structure_bytes =
        (state.model.estimated_bytes() + state.lengths.estimated_bytes() + state.bytes.estimated_bytes()) as u64;
    stats.search_index_bytes = searcher.estimated_bytes() as u64;
    stats.structure_bytes = stats.input_bytes
        + stats.compressed_bytes
        + stats.dictionary_structure_bytes
        + stats.model_structure_bytes
        + stats.search_index_bytes;
    stats.seconds = started.elapsed().as_secs_f64();
    Ok((out, stats))
}

/// Restores the original bytes from a container.
pub fn decompress(data: &[u8]) -> Result<Vec<u8>> {
    decompress_inner(data, |_| {})
}

/// Decompresses and records the dictionary and model digests after every event.
pub fn decompress_traced(data: &[u8]) -> Result<(Vec<u8>, StateTrace)> {
    let mut trace = Vec::new();
    let out = decompress_inner(data, |state| trace.push(state.digest()))?;
    Ok((out, trace))
}

fn decompress_inner<F>(data: &[u8], mut observe: F) -> Result<Vec<u8>>
where
    F: FnMut(&StreamState),
{
    let (declared, payload) = read_header(data)?;
    let mut dec = Decoder::new(payload)?;
    let mut state = StreamState::new();
    // never trust the declared length for allocation
    let mut out = Vec::with_capacity(declared.min(1 << 24) as usize);
    let overrun = Error::Overrun { declared };

    while (out.len() as u64) < declared {
        let room = declared - out.len() as u64;
        match state.model.decode(&mut dec)? {
            Symbol::Index(i) => {
                let fragment = state.dict.get_fragment(i as usize)?;
                if fragment.len() as u64 > room {
                    return Err(overrun);
                }
                out.extend_from_slice(fragment);
            }
            Symbol::New => {
                if state.dict.len() >= MAX_INDEXES {
                    return Err(Error::CorruptPayload);
                }
                let total = state.lengths.effective_total();
                let (slot, lo, hi) = state.lengths.lookup(dec.decode_freq(total)?);
                dec.confirm(lo, hi, total)?;
                state.lengths.add(slot, RAW_INCREMENT);
                let len = slot + 1;
                if len as u64 > room {
                    return Err(Error::InvalidLength(len));
                }
                let start = out.len();
                for _ in 0..len {
                    let total = state.bytes.effective_total();
                    let (b, lo, hi) = state.bytes.lookup(dec.decode_freq(total)?);
                    dec.confirm(lo, hi, total)?;
                    state.bytes.add(b, RAW_INCREMENT);
                    out.push(b as u8);
                }
                state.dict.add_fragment(&out[start..]).map_err(|e| match e {
                    Error::DuplicateFragment(_) => Error::CorruptPayload,
                    other => other,
                })?;
            }
        }
        observe(&state);
    }
    dec.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_bytes(seed: u64, len: usize, alphabet: u8) -> Vec<u8> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(0..alphabet)).collect()
    }

    #[test]
    fn empty_input() {
        let (out, stats) = compress_with_stats(b"", &SearchParams::default()).unwrap();
        assert_eq!(&out[..4], &[0x78, 0x33, 0x01, 0x00]);
        assert!(out.len() <= 4 + 8);
        assert_eq!(decompress(&out).unwrap(), b"");
        assert_eq!(stats.dict_refs + stats.raw_fragments, 0);
        assert_eq!(stats.dictionary_entries, 0);
    }

    #[test]
    fn random_roundtrip() {
        let data = random_bytes(1, 10_000, 255);
        let out = compress(&data, &SearchParams::default()).unwrap();
        assert_eq!(decompress(&out).unwrap(), data);
    }

    #[test]
    fn periodic_input_is_mostly_references() {
        let data: Vec<u8> = b"ab".iter().copied().cycle().take(1024).collect();
        let (out, stats) = compress_with_stats(&data, &SearchParams::default()).unwrap();
        assert_eq!(decompress(&out).unwrap(), data);
        assert!(stats.dict_refs > 4 * stats.raw_fragments, "{stats:?}");
        assert!(out.len() < 64);
    }

    #[test]
    fn branch_rule_and_progress() {
        let data = random_bytes(9, 4000, 4);
        let params = SearchParams::default();
        let events = parse_events(&data, &params).unwrap();
        let mut dict = FragmentDict::new();
        let mut p = 0;
        for ev in events {
            assert!(!ev.is_empty());
            let dict_len = dict.longest_match(&data, p, data.len() - p).map_or(0, |m| m.1);
            match ev {
                Event::DictRef { index, len } => {
                    assert_eq!(dict.get_fragment(index).unwrap(), &data[p..p + len]);
                    assert_eq!(len, dict_len);
                }
                Event::RawFragment(bytes) => {
                    assert_eq!(bytes, &data[p..p + bytes.len()]);
                    assert!(dict_len < bytes.len());
                    assert!(bytes.len() <= params.max_match_len);
                    dict.add_fragment(bytes).unwrap();
                }
            }
            p += ev.len();
        }
        assert_eq!(p, data.len());
    }

    #[test]
    fn encoder_and_decoder_states_agree_after_every_event() {
        let mut data = random_bytes(4, 3000, 3);
        data.extend_from_slice(&random_bytes(4, 3000, 3));
        let (out, enc_trace) = compress_traced(&data, &SearchParams::default()).unwrap();
        let (back, dec_trace) = decompress_traced(&out).unwrap();
        assert_eq!(back, data);
        assert_eq!(enc_trace, dec_trace);
    }

    #[test]
    fn params_are_not_needed_to_decode() {
        let data = random_bytes(2, 5000, 8);
        for params in [
            SearchParams {
                window_size: 1,
                max_matches: 1,
                max_match_len: 1,
                ..Default::default()
            },
            SearchParams {
                window_size: 300,
                max_matches: 3,
                max_match_len: 4096,
                guard_window: true,
                ..Default::default()
            },
        ] {
            let out = compress(&data, &params).unwrap();
            assert_eq!(decompress(&out).unwrap(), data);
        }
    }

    #[test]
    fn deterministic_output() {
        let data = random_bytes(3, 20_000, 16);
        let a = compress(&data, &SearchParams::default()).unwrap();
        let b = compress(&data, &SearchParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_params() {
        let bad = SearchParams {
            max_matches: 0,
            ..Default::default()
        };
        assert!(matches!(compress(b"abc", &bad), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn corrupt_headers_and_payloads() {
        let data = random_bytes(5, 2000, 16);
        let out = compress(&data, &SearchParams::default()).unwrap();

        let mut v = out.clone();
        v[2] ^= 0xFF;
        assert!(matches!(decompress(&v), Err(Error::UnsupportedVersion(_))));

        let mut v = out.clone();
        v[0] = b'y';
        assert!(matches!(decompress(&v), Err(Error::BadMagic)));

        let e = decompress(&out[..out.len() - 1]).unwrap_err();
        assert!(e.is_corrupt_stream(), "{e}");

        let mut v = out.clone();
        v.push(0);
        assert!(matches!(decompress(&v), Err(Error::TrailingData(1))));

        // claim one byte more than was coded
        let mut v = crate::container::write_header(data.len() as u64 + 1);
        v.extend_from_slice(&out[crate::container::write_header(data.len() as u64).len()..]);
        assert!(decompress(&v).unwrap_err().is_corrupt_stream());
    }
}
