//! Append-only fragment dictionary.
//!
//! Fragments get dense indexes in insertion order. A byte trie over the
//! fragment contents answers longest-match queries; since the dictionary is
//! not prefix-closed, a query reports the deepest *terminal* node on its path
//! rather than the deepest node reached.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::util::Fnv;

const NO_FRAGMENT: u32 = u32::MAX;
const ROOT: u32 = 0;

#[derive(Debug, Clone)]
pub struct FragmentDict {
    /// Concatenated fragment bytes; fragment `i` is `bytes[starts[i]..starts[i + 1]]`.
    bytes: Vec<u8>,
    starts: Vec<usize>,
    /// Child edges keyed by `(node << 8) | byte`.
    edges: FxHashMap<u64, u32>,
    /// Fragment index terminating at each node, or `NO_FRAGMENT`.
    terminal: Vec<u32>,
}

impl Default for FragmentDict {
    fn default() -> Self {
        Self::new()
    }
}

impl FragmentDict {
    pub fn new() -> Self {
        Self {
            bytes: Vec::new(),
            starts: vec![0],
            edges: FxHashMap::default(),
            terminal: vec![NO_FRAGMENT],
        }
    }

    pub fn len(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total bytes over all stored fragments.
    pub fn fragment_bytes(&self) -> usize {
        self.bytes.len()
    }

    pub fn trie_nodes(&self) -> usize {
        self.terminal.len()
    }

    #[inline]
    fn child(&self, node: u32, byte: u8) -> Option<u32> {
        self.edges.get(&((u64::from(node) << 8) | u64::from(byte))).copied()
    }

    /// Stores `fragment` and returns its index (the previous dictionary size).
    pub fn add_fragment(&mut self, fragment: &[u8]) -> Result<usize> {
        if fragment.is_empty() {
            return Err(Error::EmptyFragment);
        }
        let index = self.len();
        let mut node = ROOT;
        for &b in fragment {
            let key = (u64::from(node) << 8) | u64::from(b);
            node = match self.edges.get(&key) {
                Some(&next) => next,
                None => {
                    let next = self.terminal.len() as u32;
                    self.terminal.push(NO_FRAGMENT);
                    self.edges.insert(key, next);
                    next
                }
            };
        }
        let slot = &mut self.terminal[node as usize];
        if *slot != NO_FRAGMENT {
            return Err(Error::DuplicateFragment(*slot as usize));
        }
        *slot = index as u32;
        self.bytes.extend_from_slice(fragment);
        self.starts.push(self.bytes.len());
        Ok(index)
    }

    pub fn get_fragment(&self, index: usize) -> Result<&[u8]> {
        if index >= self.len() {
            return Err(Error::InvalidIndex {
                index,
                size: self.len(),
            });
        }
        Ok(&self.bytes[self.starts[index]..self.starts[index + 1]])
    }

    /// Longest stored fragment equal to `buffer[pos..pos + len]`, considering at
    /// most `min(limit, buffer.len() - pos)` bytes. Returns `(index, len)`.
    pub fn longest_match(&self, buffer: &[u8], pos: usize, limit: usize) -> Option<(usize, usize)> {
        let avail = buffer.len().saturating_sub(pos).min(limit);
        let mut node = ROOT;
        let mut best = None;
        for (depth, &b) in buffer[pos..pos + avail].iter().enumerate() {
            match self.child(node, b) {
                Some(next) => node = next,
                None => break,
            }
            let t = self.terminal[node as usize];
            if t != NO_FRAGMENT {
                best = Some((t as usize, depth + 1));
            }
        }
        best
    }

    /// Rough heap footprint of the dictionary structures in bytes.
    pub fn estimated_bytes(&self) -> usize {
        self.bytes.capacity()
            + self.starts.capacity() * std::mem::size_of::<usize>()
            + self.terminal.capacity() * std::mem::size_of::<u32>()
            // hashbrown: key + value + one control byte per bucket
            + self.edges.capacity() * (std::mem::size_of::<(u64, u32)>() + 1)
    }

    /// Order-sensitive digest of the dictionary contents.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv::default();
        for w in self.starts.windows(2) {
            h.write_u64((w[1] - w[0]) as u64);
            h.write(&self.bytes[w[0]..w[1]]);
        }
        h.finish()
    }
}
