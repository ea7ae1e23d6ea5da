//! Adaptive frequency tables and integer code-length estimates.

/// `floor(2^(r/32) * 2^62)` for `r = 0..32`.
const EXP2_32THS: [u64; 32] = [
    0x4000000000000000,
    0x4166c34c5615d0eb,
    0x42d561b3e6243d8a,
    0x444c0740496d4293,
    0x45cae0f1f545eb73,
    0x47521cc5a2e6a9e0,
    0x48e1e9b9d588e19b,
    0x4a7a77d47f7b84b0,
    0x4c1bf828c6dc54b7,
    0x4dc69cdceaa72a9c,
    0x4f7a993048d088d6,
    0x513821818624b40c,
    0x52ff6b54d8a89c75,
    0x54d0ad5a753e077c,
    0x56ac1f752150a563,
    0x5891fac0e95612c7,
    0x5a827999fcef3242,
    0x5c7dd7a3b17dcf74,
    0x5e8451cfac061b5f,
    0x6096266533384a2b,
    0x62b39508aa836d6e,
    0x64dcdec3371793d1,
    0x6712460a8fc24071,
    0x69540ec8f895722d,
    0x6ba27e656b4eb57a,
    0x6dfddbcbed791baa,
    0x70666f76154a7088,
    0x72dc8373be41a454,
    0x75606373ee921c97,
    0x77f25ccdee6d7ae5,
    0x7a92be8a92436616,
    0x7d41d96db915019d,
];

/// `round(16 * log2(total / freq))`, i.e. code length in 1/16-bit units.
///
/// Integer-only so that encoder and decoder agree on every platform.
pub fn cost_units(total: u32, freq: u32) -> u32 {
    assert!(freq >= 1 && freq <= total, "frequency {freq} outside 1..={total}");
    let mut e = freq.leading_zeros() - total.leading_zeros();
    if u64::from(freq) << e > u64::from(total) {
        e -= 1;
    }
    let base = u128::from(freq) << e;
    let target = u128::from(total) << 62;
    let r = EXP2_32THS.partition_point(|&p| base * u128::from(p) <= target) as u32 - 1;
    // round(16x) == ceil(floor(32x) / 2)
    (32 * e + r).div_ceil(2)
}

/// Fenwick tree over `u32` weights that can grow one slot at a time.
#[derive(Debug, Clone, Default)]
pub struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn from_weights(weights: &[u32]) -> Self {
        let mut tree = weights.to_vec();
        for i in 1..=tree.len() {
            let parent = i + (i & i.wrapping_neg());
            if parent <= tree.len() {
                tree[parent - 1] += tree[i - 1];
            }
        }
        Self { tree }
    }

    pub fn push(&mut self, weight: u32) {
        let i = self.tree.len() + 1;
        let low = i & i.wrapping_neg();
        let mut node = weight;
        let mut step = 1;
        while step < low {
            node += self.tree[i - step - 1];
            step <<= 1;
        }
        self.tree.push(node);
    }

    pub fn add(&mut self, slot: usize, delta: u32) {
        let mut i = slot + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights in slots `0..slot`.
    pub fn prefix(&self, slot: usize) -> u32 {
        let mut i = slot;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i - 1];
            i &= i - 1;
        }
        sum
    }

    /// Slot `s` with `prefix(s) <= value < prefix(s + 1)`, and `prefix(s)`.
    pub fn find(&self, value: u32) -> (usize, u32) {
        let n = self.tree.len();
        let mut pos = 0;
        let mut rem = value;
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= rem {
                pos = next;
                rem -= self.tree[next - 1];
            }
            step >>= 1;
        }
        (pos, value - rem)
    }

    pub fn estimated_bytes(&self) -> usize {
        self.tree.capacity() * 4
    }
}

/// Adaptive table over a dense alphabet with an implicit +1 floor per symbol:
/// `effective_freq(s) = stored(s) + 1`.
///
/// Stored counts are halved once their sum reaches `limit`.
#[derive(Debug, Clone)]
pub struct FreqTable {
    stored: Vec<u32>,
    stored_total: u32,
    /// Fenwick tree over effective frequencies.
    cum: Fenwick,
    limit: u32,
}

impl FreqTable {
    pub fn new(alphabet: usize, limit: u32) -> Self {
        Self {
            stored: vec![0; alphabet],
            stored_total: 0,
            cum: Fenwick::from_weights(&vec![1; alphabet]),
            limit,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.stored.len()
    }

    pub fn stored(&self, s: usize) -> u32 {
        self.stored[s]
    }

    pub fn stored_total(&self) -> u32 {
        self.stored_total
    }

    pub fn effective_freq(&self, s: usize) -> u32 {
        self.stored[s] + 1
    }

    pub fn effective_total(&self) -> u32 {
        self.stored_total + self.stored.len() as u32
    }

    /// Cumulative interval `[lo, hi)` of symbol `s`.
    pub fn interval(&self, s: usize) -> (u32, u32) {
        let lo = self.cum.prefix(s);
        (lo, lo + self.effective_freq(s))
    }

    /// Symbol whose interval contains `value`, with that interval.
    pub fn lookup(&self, value: u32) -> (usize, u32, u32) {
        let (s, lo) = self.cum.find(value);
        (s, lo, lo + self.effective_freq(s))
    }

    pub fn cost(&self, s: usize) -> u32 {
        cost_units(self.effective_total(), self.effective_freq(s))
    }

    /// Extends the alphabet by one symbol with the given stored count.
    pub fn push_symbol(&mut self, stored: u32) {
        self.stored.push(stored);
        self.stored_total += stored;
        self.cum.push(stored + 1);
        self.maybe_rescale();
    }

    pub fn add(&mut self, s: usize, inc: u32) {
        self.stored[s] += inc;
        self.stored_total += inc;
        self.cum.add(s, inc);
        self.maybe_rescale();
    }

    fn maybe_rescale(&mut self) {
        if self.stored_total < self.limit {
            return;
        }
        let mut total = 0;
        for c in &mut self.stored {
            *c >>= 1;
            total += *c;
        }
        self.stored_total = total;
        let eff: Vec<u32> = self.stored.iter().map(|&c| c + 1).collect();
        self.cum = Fenwick::from_weights(&eff);
    }

    pub fn estimated_bytes(&self) -> usize {
        self.stored.capacity() * 4 + self.cum.estimated_bytes()
    }

    pub(crate) fn hash_into(&self, h: &mut crate::util::Fnv) {
        h.write_u64(self.stored.len() as u64);
        for &c in &self.stored {
            h.write_u32(c);
        }
    }
}
