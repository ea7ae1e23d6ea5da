//! Look-ahead window search: picks the length of the fragment to add to the
//! dictionary at the current position.
//!
//! For each candidate length `l` the searcher counts how often
//! `buffer[p..p + l]` re-occurs inside the window `[p + 1, p + W)` (the whole
//! occurrence must fit in the window and the buffer). It then walks the match
//! budget `m = M..1` and, for each `m`, the lengths `l = L..1`, returning the
//! first `l` whose count exceeds `m`.
//!
//! Counts are computed by candidate filtering: the set of positions matching
//! at length `l` is narrowed to those that also match at `l + 1`.

use serde::{Deserialize, Serialize};

use crate::dictionary::FragmentDict;
use crate::error::{Error, Result};

/// Hard upper bound on the maximum match length.
pub const MAX_MATCH_LEN_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SearchParams {
    /// Window size in bytes.
    pub window_size: usize,
    pub max_matches: usize,
    pub max_match_len: usize,
    /// Truncate a fragment that would swallow the start of a long dictionary match.
    pub guard_dictionary: bool,
    /// Truncate a fragment that would swallow the start of a long window repeat.
    pub guard_window: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            window_size: 8192,
            max_matches: 28,
            max_match_len: 64,
            guard_dictionary: true,
            guard_window: false,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidParams("window size must be at least 1".into()));
        }
        if self.max_matches == 0 {
            return Err(Error::InvalidParams("max matches must be at least 1".into()));
        }
        if !(1..=MAX_MATCH_LEN_LIMIT).contains(&self.max_match_len) {
            return Err(Error::InvalidParams(format!(
                "max match length must be in 1..={MAX_MATCH_LEN_LIMIT}"
            )));
        }
        Ok(())
    }

    pub fn without_guards(mut self) -> Self {
        self.guard_dictionary = false;
        self.guard_window = false;
        self
    }
}

/// Occurrence counts `c_l` for `l = 1..=counts.len()` at one position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceProfile {
    counts: Vec<usize>,
}

impl OccurrenceProfile {
    /// Count for length `l` (1-based); zero beyond the profiled range.
    pub fn count(&self, l: usize) -> usize {
        assert!(l >= 1, "lengths start at 1");
        self.counts.get(l - 1).copied().unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Number of occurrences of `buffer[p..p + l]` starting in `p + 1..` and
/// ending within both the window `[p, p + window)` and the buffer.
pub fn count_occurrences(buffer: &[u8], p: usize, l: usize, window: usize) -> usize {
    assert!(p + l <= buffer.len(), "fragment exceeds buffer");
    let end = window_end(buffer, p, window);
    if l == 0 || p + 1 + l > end {
        return 0;
    }
    let needle = &buffer[p..p + l];
    (p + 1..=end - l).filter(|&q| &buffer[q..q + l] == needle).count()
}

#[inline]
fn window_end(buffer: &[u8], p: usize, window: usize) -> usize {
    p.saturating_add(window).min(buffer.len())
}

/// Counts for every length `1..=min(max_len, remaining)` at `p`.
pub fn occurrence_profile(buffer: &[u8], p: usize, max_len: usize, window: usize) -> OccurrenceProfile {
    let max_len = max_len.min(buffer.len() - p);
    let end = window_end(buffer, p, window);
    let mut counts = Vec::with_capacity(max_len);
    if max_len == 0 {
        return OccurrenceProfile { counts };
    }
    let first = buffer[p];
    let mut cands: Vec<usize> = (p + 1..end).filter(|&q| buffer[q] == first).collect();
    counts.push(cands.len());
    for l in 1..max_len {
        let want = buffer[p + l];
        cands.retain(|&q| q + l < end && buffer[q + l] == want);
        counts.push(cands.len());
    }
    OccurrenceProfile { counts }
}

/// Positions of every byte and byte pair, grouped by value and sorted.
#[derive(Debug, Clone)]
struct NgramIndex {
    uni_start: Vec<u32>,
    uni_pos: Vec<u32>,
    bi_start: Vec<u32>,
    bi_pos: Vec<u32>,
}

impl NgramIndex {
    fn build(buffer: &[u8]) -> Self {
        assert!(buffer.len() < u32::MAX as usize, "buffer too large to index");
        let bigram = |q: usize| (usize::from(buffer[q]) << 8) | usize::from(buffer[q + 1]);

        let mut uni_start = vec![0u32; 257];
        for &b in buffer {
            uni_start[usize::from(b) + 1] += 1;
        }
        for k in 0..256 {
            uni_start[k + 1] += uni_start[k];
        }
        let mut fill = uni_start.clone();
        let mut uni_pos = vec![0u32; buffer.len()];
        for (q, &b) in buffer.iter().enumerate() {
            let slot = &mut fill[usize::from(b)];
            uni_pos[*slot as usize] = q as u32;
            *slot += 1;
        }

        let pairs = buffer.len().saturating_sub(1);
        let mut bi_start = vec![0u32; (1 << 16) + 1];
        for q in 0..pairs {
            bi_start[bigram(q) + 1] += 1;
        }
        for k in 0..1 << 16 {
            bi_start[k + 1] += bi_start[k];
        }
        let mut fill = bi_start.clone();
        let mut bi_pos = vec![0u32; pairs];
        for q in 0..pairs {
            let slot = &mut fill[bigram(q)];
            bi_pos[*slot as usize] = q as u32;
            *slot += 1;
        }

        Self {
            uni_start,
            uni_pos,
            bi_start,
            bi_pos,
        }
    }

    /// Positions `q` with the given key and `lo <= q <= hi`.
    fn range<'a>(start: &[u32], pos: &'a [u32], key: usize, lo: usize, hi: usize) -> &'a [u32] {
        let list = &pos[start[key] as usize..start[key + 1] as usize];
        let a = list.partition_point(|&q| (q as usize) < lo);
        let b = list.partition_point(|&q| (q as usize) <= hi);
        &list[a..b.max(a)]
    }

    fn estimated_bytes(&self) -> usize {
        4 * (self.uni_start.len() + self.uni_pos.len() + self.bi_start.len() + self.bi_pos.len())
    }
}

/// Window search over one input buffer.
#[derive(Debug, Clone)]
pub struct WindowSearcher<'a> {
    buffer: &'a [u8],
    index: Option<NgramIndex>,
    scratch: Vec<u32>,
}

impl<'a> WindowSearcher<'a> {
    /// Builds position lists so candidate sets come from binary searches
    /// instead of window scans.
    pub fn new(buffer: &'a [u8]) -> Self {
        Self {
            buffer,
            index: Some(NgramIndex::build(buffer)),
            scratch: Vec::new(),
        }
    }

    /// Scans the window directly; no precomputation.
    pub fn unindexed(buffer: &'a [u8]) -> Self {
        Self {
            buffer,
            index: None,
            scratch: Vec::new(),
        }
    }

    pub fn buffer(&self) -> &'a [u8] {
        self.buffer
    }

    pub fn estimated_bytes(&self) -> usize {
        self.index.as_ref().map_or(0, NgramIndex::estimated_bytes)
    }

    /// Number of occurrences at length 1.
    fn count_first(&self, p: usize, end: usize) -> usize {
        if p + 1 >= end {
            return 0;
        }
        match &self.index {
            Some(ix) => {
                NgramIndex::range(&ix.uni_start, &ix.uni_pos, usize::from(self.buffer[p]), p + 1, end - 1).len()
            }
            None => {
                let first = self.buffer[p];
                self.buffer[p + 1..end].iter().filter(|&&b| b == first).count()
            }
        }
    }

    /// Fills `scratch` with occurrence starts at length 2.
    fn load_pairs(&mut self, p: usize, end: usize) {
        self.scratch.clear();
        if p + 2 >= end {
            return;
        }
        let buffer = self.buffer;
        match &self.index {
            Some(ix) => {
                let key = (usize::from(buffer[p]) << 8) | usize::from(buffer[p + 1]);
                self.scratch
                    .extend_from_slice(NgramIndex::range(&ix.bi_start, &ix.bi_pos, key, p + 1, end - 2));
            }
            None => {
                let (a, b) = (buffer[p], buffer[p + 1]);
                self.scratch.extend(
                    (p + 1..end - 1)
                        .filter(|&q| buffer[q] == a && buffer[q + 1] == b)
                        .map(|q| q as u32),
                );
            }
        }
    }

    /// Length chosen by the match-budget loop, before any guard.
    ///
    /// The first budget `m` (descending from `M`) for which some count
    /// exceeds `m` is `min(M, c_1 - 1)`, since `c_1` is the largest count;
    /// the result is then the longest `l` with `c_l` above that budget.
    pub fn best_length(&mut self, p: usize, window: usize, max_matches: usize, max_len: usize) -> usize {
        let buffer = self.buffer;
        let max_len = max_len.min(buffer.len() - p);
        let end = window_end(buffer, p, window);
        let c1 = self.count_first(p, end);
        if c1 <= 1 || max_len == 1 {
            return 1;
        }
        let budget = max_matches.min(c1 - 1);
        self.load_pairs(p, end);
        if self.scratch.len() <= budget {
            return 1;
        }
        let mut l = 2;
        while l < max_len {
            let want = buffer[p + l];
            let mut kept = 0;
            for i in 0..self.scratch.len() {
                let q = self.scratch[i] as usize;
                if q + l < end && buffer[q + l] == want {
                    self.scratch[kept] = q as u32;
                    kept += 1;
                }
            }
            if kept <= budget {
                break;
            }
            self.scratch.truncate(kept);
            l += 1;
        }
        l
    }

    /// Full window search at `p`, guards included.
    pub fn search(&mut self, p: usize, params: &SearchParams, dict: &FragmentDict) -> usize {
        assert!(p < self.buffer.len(), "search position past end of buffer");
        let cand = self.best_length(p, params.window_size, params.max_matches, params.max_match_len);
        self.guard(p, cand, params, dict)
    }

    /// Truncates `candidate_len` at the first interior offset where a future
    /// match at least twice as long begins.
    pub fn guard(&mut self, p: usize, candidate_len: usize, params: &SearchParams, dict: &FragmentDict) -> usize {
        if !(params.guard_dictionary || params.guard_window) {
            return candidate_len;
        }
        let threshold = 2 * candidate_len;
        for d in 1..candidate_len {
            let at = p + d;
            if params.guard_dictionary {
                if let Some((_, len)) = dict.longest_match(self.buffer, at, usize::MAX) {
                    if len >= threshold {
                        return d;
                    }
                }
            }
            if params.guard_window && self.best_length(at, params.window_size, 1, params.max_match_len) >= threshold {
                return d;
            }
        }
        candidate_len
    }
}

/// Window search at `p` without precomputed indexes.
pub fn search_in_window(buffer: &[u8], p: usize, params: &SearchParams, dict: &FragmentDict) -> usize {
    WindowSearcher::unindexed(buffer).search(p, params, dict)
}

pub fn apply_future_match_guard(
    buffer: &[u8],
    p: usize,
    candidate_len: usize,
    params: &SearchParams,
    dict: &FragmentDict,
) -> usize {
    assert!(candidate_len >= 1 && p + candidate_len <= buffer.len());
    WindowSearcher::unindexed(buffer).guard(p, candidate_len, params, dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Naive count straight from the definition.
    fn oracle_count(buffer: &[u8], p: usize, l: usize, w: usize) -> usize {
        let needle = &buffer[p..p + l];
        buffer
            .windows(l)
            .enumerate()
            .filter(|&(q, s)| q > p && q + l <= p + w && s == needle)
            .count()
    }

    /// Literal transcription of the budget/length double loop over oracle counts.
    fn oracle_search(buffer: &[u8], p: usize, w: usize, m_max: usize, l_max: usize) -> usize {
        let l_max = l_max.min(buffer.len() - p);
        let c: Vec<usize> = (1..=l_max).map(|l| oracle_count(buffer, p, l, w)).collect();
        for m in (1..=m_max).rev() {
            for l in (1..=l_max).rev() {
                if c[l - 1] > m {
                    return l;
                }
            }
        }
        1
    }

    fn params(w: usize, m: usize, l: usize) -> SearchParams {
        SearchParams {
            window_size: w,
            max_matches: m,
            max_match_len: l,
            guard_dictionary: false,
            guard_window: false,
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_occurrences(b"abababab", 0, 2, 8), 3);
        assert_eq!(count_occurrences(b"aaaa", 0, 1, 4), 3);
        assert_eq!(count_occurrences(b"abcdefgh", 0, 1, 8), 0);
        // the occurrence at q = 6 ends past a window of 7
        assert_eq!(count_occurrences(b"abababab", 0, 2, 7), 2);
    }

    #[test]
    fn search_examples() {
        let d = FragmentDict::new();
        let buf = b"abcabcabcabc";
        let prof = occurrence_profile(buf, 0, 4, 12);
        assert_eq!(prof.counts(), &[3, 3, 3, 2]);
        assert_eq!(search_in_window(buf, 0, &params(12, 3, 4), &d), 3);
        assert_eq!(oracle_search(buf, 0, 12, 3, 4), 3);

        let run = [b'a'; 16];
        assert_eq!(occurrence_profile(&run, 0, 4, 16).count(4), 12);
        assert_eq!(search_in_window(&run, 0, &params(16, 2, 4), &d), 4);

        assert_eq!(
            search_in_window(b"abcdefgh", 0, &SearchParams::default().without_guards(), &d),
            1
        );
        assert_eq!(search_in_window(b"abcdefgh", 0, &params(1, 1, 64), &d), 1);
    }

    #[test]
    fn dictionary_guard_truncates_before_long_match() {
        let mut d = FragmentDict::new();
        d.add_fragment(b"abcdefgh").unwrap();
        let buf = b"xyabcdefghij";
        let mut p = params(8192, 28, 64);
        assert_eq!(apply_future_match_guard(buf, 0, 4, &p, &d), 4);
        p.guard_dictionary = true;
        assert_eq!(apply_future_match_guard(buf, 0, 4, &p, &d), 2);
        assert_eq!(apply_future_match_guard(buf, 0, 1, &p, &d), 1);
        // a match of length 8 is not "substantial" for a candidate of length 5
        assert_eq!(apply_future_match_guard(buf, 0, 5, &p, &d), 5);
    }

    #[test]
    fn window_guard_truncates_before_long_repeat() {
        // "qz" + a 12-byte block repeated twice
        let mut buf = b"qz".to_vec();
        let block = b"KLMNOPQRSTUV";
        buf.extend_from_slice(block);
        buf.extend_from_slice(block);
        buf.extend_from_slice(block);
        let d = FragmentDict::new();
        let mut p = params(64, 1, 64);
        p.guard_window = true;
        assert_eq!(apply_future_match_guard(&buf, 0, 4, &p, &d), 2);
    }

    #[test]
    fn params_validation() {
        assert!(SearchParams::default().validate().is_ok());
        assert!(params(0, 1, 1).validate().is_err());
        assert!(params(1, 0, 1).validate().is_err());
        assert!(params(1, 1, 0).validate().is_err());
        assert!(params(1, 1, MAX_MATCH_LEN_LIMIT + 1).validate().is_err());
    }

    fn small_buffer() -> impl Strategy<Value = Vec<u8>> {
        (1u8..=4).prop_flat_map(|k| proptest::collection::vec(0..k, 1..80))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn counts_match_oracle(buf in small_buffer(), ps in any::<usize>(), ls in any::<usize>(), w in 1usize..100) {
            let p = ps % buf.len();
            let l = 1 + ls % (buf.len() - p);
            prop_assert_eq!(count_occurrences(&buf, p, l, w), oracle_count(&buf, p, l, w));
        }

        #[test]
        fn profile_is_monotone_and_exact(buf in small_buffer(), ps in any::<usize>(), w in 1usize..100, l in 1usize..20) {
            let p = ps % buf.len();
            let prof = occurrence_profile(&buf, p, l, w);
            for (i, &c) in prof.counts().iter().enumerate() {
                prop_assert_eq!(c, oracle_count(&buf, p, i + 1, w));
            }
            prop_assert!(prof.counts().windows(2).all(|x| x[1] <= x[0]));
        }

        #[test]
        fn search_matches_literal_loop(buf in small_buffer(), ps in any::<usize>(), w in 1usize..100, m in 1usize..8, l in 1usize..20) {
            let p = ps % buf.len();
            let d = FragmentDict::new();
            let pr = params(w, m, l);
            let expected = oracle_search(&buf, p, w, m, l);
            prop_assert_eq!(search_in_window(&buf, p, &pr, &d), expected);
            prop_assert_eq!(WindowSearcher::new(&buf).search(p, &pr, &d), expected);
            prop_assert!(expected >= 1 && expected <= l.min(buf.len() - p));
        }
    }
}
