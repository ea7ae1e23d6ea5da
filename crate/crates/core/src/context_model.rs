//! Context model for the dictionary-index stream.
//!
//! Every coded symbol is either a dictionary index or `New` (a raw fragment
//! follows and becomes the next dictionary entry). Three model classes are
//! kept for the current history `(h2, h1)` of the last two indexes:
//!
//! * order 2: a sparse table keyed by `(h2, h1)`,
//! * order 1: a sparse table keyed by `h1`,
//! * order 0: one dense table over the whole alphabet with a +1 floor.
//!
//! Sparse tables hold only symbols seen in that context plus an escape slot;
//! an escape continues at the next lower order, so every symbol is codable
//! from every class. Before each symbol the class with the lowest average
//! past code length is chosen (decoder-reproducible, no side information).
//! After each symbol, all three classes are charged the code length they
//! would have spent and all tables learn the symbol.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freq::{cost_units, FreqTable};
use crate::range_coder::{Decoder, Encoder};
use crate::util::Fnv;

/// Count added to a symbol each time it is coded.
pub const INCREMENT: u32 = 32;
/// Count added to a sparse table's escape slot whenever it learns a new symbol.
pub const ESCAPE_INCREMENT: u32 = 32;
/// Rescale bound for the sparse context tables.
pub const CONTEXT_LIMIT: u32 = 1 << 16;
/// Rescale bound for the dense order-0 table; with the dictionary cap this
/// keeps its effective total under the coder's precision limit.
pub const ORDER0_LIMIT: u32 = 1 << 21;
/// Largest number of dictionary indexes the model can address.
pub const MAX_INDEXES: usize = (1 << 21) - 2;

/// Initial score, in 1/16-bit units, of a class instance with no history.
pub const ORDER2_BIAS: u64 = 32;
pub const ORDER1_BIAS: u64 = 32;
pub const ORDER0_BIAS: u64 = 96;

const START: u32 = u32::MAX;
const NEW_KEY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Index(u32),
    New,
}

impl Symbol {
    fn key(self) -> u32 {
        match self {
            Symbol::Index(i) => i,
            Symbol::New => NEW_KEY,
        }
    }

    fn from_key(key: u32) -> Self {
        if key == NEW_KEY {
            Symbol::New
        } else {
            Symbol::Index(key)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ContextClass {
    Order2,
    Order1,
    Order0,
}

/// Accumulated counterfactual code length of one class instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelStats {
    pub bits: u64,
    pub uses: u64,
}

impl SelStats {
    /// Score as a fraction `(bits, uses)`; the bias stands in until first use.
    fn score(&self, bias: u64) -> (u64, u64) {
        if self.uses == 0 {
            (bias, 1)
        } else {
            (self.bits, self.uses)
        }
    }

    fn charge(&mut self, units: u32) {
        self.bits += u64::from(units);
        self.uses += 1;
    }
}

/// Picks the class with the smallest score; earlier classes win ties.
/// Scores are compared as exact fractions.
pub fn pick_class(order2: (u64, u64), order1: (u64, u64), order0: (u64, u64)) -> ContextClass {
    let less = |a: (u64, u64), b: (u64, u64)| u128::from(a.0) * u128::from(b.1) < u128::from(b.0) * u128::from(a.1);
    let mut best = (ContextClass::Order2, order2);
    for cand in [(ContextClass::Order1, order1), (ContextClass::Order0, order0)] {
        if less(cand.1, best.1) {
            best = cand;
        }
    }
    best.0
}

/// Sparse adaptive table: seen symbols plus an escape slot at the front.
#[derive(Debug, Clone, Default)]
struct SparseTable {
    /// `(symbol key, count)`, roughly most-frequent first; counts are >= 1.
    entries: Vec<(u32, u32)>,
    escape: u32,
    /// Sum of entry counts plus `escape`.
    stored_total: u32,
}

enum Slot {
    Escape,
    Entry(usize),
}

impl SparseTable {
    fn escape_freq(&self) -> u32 {
        self.escape + 1
    }

    fn total(&self) -> u32 {
        self.stored_total + 1
    }

    /// Interval of `key`, or `None` when the symbol must escape.
    fn find(&self, key: u32) -> Option<(usize, u32, u32)> {
        let mut lo = self.escape_freq();
        for (i, &(k, c)) in self.entries.iter().enumerate() {
            if k == key {
                return Some((i, lo, lo + c));
            }
            lo += c;
        }
        None
    }

    fn locate(&self, value: u32) -> (Slot, u32, u32) {
        let esc = self.escape_freq();
        if value < esc {
            return (Slot::Escape, 0, esc);
        }
        let mut lo = esc;
        for (i, &(_, c)) in self.entries.iter().enumerate() {
            if value < lo + c {
                return (Slot::Entry(i), lo, lo + c);
            }
            lo += c;
        }
        unreachable!("value below total always lands in a slot")
    }

    fn escape_cost(&self) -> u32 {
        cost_units(self.total(), self.escape_freq())
    }

    fn learn(&mut self, key: u32) {
        match self.entries.iter().position(|&(k, _)| k == key) {
            Some(i) => {
                self.entries[i].1 += INCREMENT;
                // one bubble step keeps frequent symbols near the front
                if i > 0 && self.entries[i].1 > self.entries[i - 1].1 {
                    self.entries.swap(i, i - 1);
                }
            }
            None => {
                self.entries.push((key, INCREMENT));
                self.escape += ESCAPE_INCREMENT;
                self.stored_total += ESCAPE_INCREMENT;
            }
        }
        self.stored_total += INCREMENT;
        if self.stored_total >= CONTEXT_LIMIT {
            self.rescale();
        }
    }

    fn rescale(&mut self) {
        self.escape >>= 1;
        let mut total = self.escape;
        self.entries.retain_mut(|e| {
            e.1 >>= 1;
            total += e.1;
            e.1 > 0
        });
        self.stored_total = total;
    }

    fn estimated_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.entries.capacity() * 8
    }

    fn hash_into(&self, h: &mut Fnv) {
        h.write_u32(self.escape);
        h.write_u64(self.entries.len() as u64);
        for &(k, c) in &self.entries {
            h.write_u32(k);
            h.write_u32(c);
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ContextInstance {
    table: SparseTable,
    sel: SelStats,
}

/// Decoder-reproducible model state.
#[derive(Debug, Clone)]
pub struct ContextModel {
    /// Slot 0 is `New`, slot `i + 1` is index `i`.
    order0: FreqTable,
    order0_sel: SelStats,
    /// Order-1 instance id per `h1` slot (slot 0 is the start marker).
    order1_ids: Vec<u32>,
    order1: Vec<ContextInstance>,
    /// Dense ids for `(h2, h1)` pairs in first-use order.
    order2_ids: FxHashMap<(u32, u32), u32>,
    order2: Vec<ContextInstance>,
    history: (u32, u32),
    /// Dictionary size seen by the model.
    indexes: usize,
}

/// Costs of coding one symbol starting from each class.
#[derive(Debug, Clone, Copy)]
struct Costs {
    order2: u32,
    order1: u32,
    order0: u32,
}

impl Default for ContextModel {
    fn default() -> Self {
        Self::new()
    }
}

impl ContextModel {
    pub fn new() -> Self {
        Self {
            order0: FreqTable::new(1, ORDER0_LIMIT),
            order0_sel: SelStats::default(),
            order1_ids: vec![u32::MAX],
            order1: Vec::new(),
            order2_ids: FxHashMap::default(),
            order2: Vec::new(),
            history: (START, START),
            indexes: 0,
        }
    }

    /// Alphabet size: dictionary indexes plus `New`.
    pub fn alphabet_size(&self) -> usize {
        self.indexes + 1
    }

    /// `(h2, h1)`; `None` marks the start of the stream.
    pub fn history(&self) -> (Option<u32>, Option<u32>) {
        let opt = |x: u32| (x != START).then_some(x);
        (opt(self.history.0), opt(self.history.1))
    }

    pub fn order1_instances(&self) -> usize {
        self.order1.len()
    }

    pub fn order2_instances(&self) -> usize {
        self.order2.len()
    }

    fn order0_slot(sym: Symbol) -> usize {
        match sym {
            Symbol::New => 0,
            Symbol::Index(i) => i as usize + 1,
        }
    }

    fn h1_slot(h1: u32) -> usize {
        if h1 == START {
            0
        } else {
            h1 as usize + 1
        }
    }

    /// Instance ids for the current history, created on first use.
    fn instances(&mut self) -> (usize, usize) {
        let slot = Self::h1_slot(self.history.1);
        if slot >= self.order1_ids.len() {
            self.order1_ids.resize(slot + 1, u32::MAX);
        }
        if self.order1_ids[slot] == u32::MAX {
            self.order1_ids[slot] = self.order1.len() as u32;
            self.order1.push(ContextInstance::default());
        }
        let id1 = self.order1_ids[slot] as usize;
        let next = self.order2.len() as u32;
        let id2 = *self.order2_ids.entry(self.history).or_insert(next);
        if id2 == next {
            self.order2.push(ContextInstance::default());
        }
        (id2 as usize, id1)
    }

    fn existing_instances(&self) -> (Option<usize>, Option<usize>) {
        let id1 = self
            .order1_ids
            .get(Self::h1_slot(self.history.1))
            .filter(|&&id| id != u32::MAX)
            .map(|&id| id as usize);
        let id2 = self.order2_ids.get(&self.history).map(|&id| id as usize);
        (id2, id1)
    }

    fn check_symbol(&self, sym: Symbol) {
        if let Symbol::Index(i) = sym {
            assert!((i as usize) < self.indexes, "index {i} outside alphabet");
        }
    }

    /// Class used for the next symbol.
    pub fn select_context(&self) -> ContextClass {
        let (id2, id1) = self.existing_instances();
        let s2 = id2.map_or(SelStats::default(), |id| self.order2[id].sel);
        let s1 = id1.map_or(SelStats::default(), |id| self.order1[id].sel);
        pick_class(
            s2.score(ORDER2_BIAS),
            s1.score(ORDER1_BIAS),
            self.order0_sel.score(ORDER0_BIAS),
        )
    }

    /// Code length of `sym` (1/16 bits) when coding starts at `class`.
    pub fn code_length(&self, class: ContextClass, sym: Symbol) -> u32 {
        self.check_symbol(sym);
        let (id2, id1) = self.existing_instances();
        let c = self.costs(id2, id1, sym);
        match class {
            ContextClass::Order2 => c.order2,
            ContextClass::Order1 => c.order1,
            ContextClass::Order0 => c.order0,
        }
    }

    fn costs(&self, id2: Option<usize>, id1: Option<usize>, sym: Symbol) -> Costs {
        let key = sym.key();
        let order0 = self.order0.cost(Self::order0_slot(sym));
        let cascade = |table: Option<&SparseTable>, below: u32| match table {
            None => below,
            Some(t) => match t.find(key) {
                Some((_, lo, hi)) => cost_units(t.total(), hi - lo),
                None => t.escape_cost() + below,
            },
        };
        let order1 = cascade(id1.map(|id| &self.order1[id].table), order0);
        let order2 = cascade(id2.map(|id| &self.order2[id].table), order1);
        Costs { order2, order1, order0 }
    }

    pub fn encode(&mut self, enc: &mut Encoder, sym: Symbol) -> Result<()> {
        self.check_symbol(sym);
        let class = self.select_context();
        let (id2, id1) = self.instances();
        let key = sym.key();
        let mut level = class;
        loop {
            let table = match level {
                ContextClass::Order2 => &self.order2[id2].table,
                ContextClass::Order1 => &self.order1[id1].table,
                ContextClass::Order0 => {
                    let (lo, hi) = self.order0.interval(Self::order0_slot(sym));
                    enc.encode(lo, hi, self.order0.effective_total())?;
                    break;
                }
            };
            match table.find(key) {
                Some((_, lo, hi)) => {
                    enc.encode(lo, hi, table.total())?;
                    break;
                }
                None => {
                    if table.total() > 1 {
                        enc.encode(0, table.escape_freq(), table.total())?;
                    }
                    level = lower(level);
                }
            }
        }
        self.learn(id2, id1, sym);
        Ok(())
    }

    pub fn decode(&mut self, dec: &mut Decoder<'_>) -> Result<Symbol> {
        let class = self.select_context();
        let (id2, id1) = self.instances();
        let mut level = class;
        let sym = loop {
            let table = match level {
                ContextClass::Order2 => &self.order2[id2].table,
                ContextClass::Order1 => &self.order1[id1].table,
                ContextClass::Order0 => {
                    let total = self.order0.effective_total();
                    let value = dec.decode_freq(total)?;
                    let (slot, lo, hi) = self.order0.lookup(value);
                    dec.confirm(lo, hi, total)?;
                    break if slot == 0 {
                        Symbol::New
                    } else {
                        Symbol::Index(slot as u32 - 1)
                    };
                }
            };
            if table.total() == 1 {
                level = lower(level);
                continue;
            }
            let total = table.total();
            let value = dec.decode_freq(total)?;
            let (slot, lo, hi) = table.locate(value);
            dec.confirm(lo, hi, total)?;
            match slot {
                Slot::Escape => level = lower(level),
                Slot::Entry(i) => break Symbol::from_key(table.entries[i].0),
            }
        };
        if let Symbol::Index(i) = sym {
            if i as usize >= self.indexes {
                return Err(Error::InvalidIndex {
                    index: i as usize,
                    size: self.indexes,
                });
            }
        }
        self.learn(id2, id1, sym);
        Ok(sym)
    }

    /// Post-symbol update; see the module docs. `class_chosen` does not
    /// influence the update since every class learns.
    pub fn update(&mut self, _class_chosen: ContextClass, sym: Symbol) {
        self.check_symbol(sym);
        let (id2, id1) = self.instances();
        self.learn(id2, id1, sym);
    }

    fn learn(&mut self, id2: usize, id1: usize, sym: Symbol) {
        let costs = self.costs(Some(id2), Some(id1), sym);
        self.order2[id2].sel.charge(costs.order2);
        self.order1[id1].sel.charge(costs.order1);
        self.order0_sel.charge(costs.order0);

        let key = sym.key();
        self.order2[id2].table.learn(key);
        self.order1[id1].table.learn(key);
        self.order0.add(Self::order0_slot(sym), INCREMENT);

        let index = match sym {
            Symbol::Index(i) => i,
            Symbol::New => {
                let i = self.indexes as u32;
                self.indexes += 1;
                self.order0.push_symbol(0);
                i
            }
        };
        self.history = (self.history.1, index);
    }

    /// Stored count of `sym` in the tables of the current history, per class.
    pub fn stored_counts(&self, sym: Symbol) -> (u32, u32, u32) {
        let (id2, id1) = self.existing_instances();
        let key = sym.key();
        let sparse = |t: Option<&ContextInstance>| t.and_then(|i| i.table.find(key)).map_or(0, |(_, lo, hi)| hi - lo);
        (
            sparse(id2.map(|id| &self.order2[id])),
            sparse(id1.map(|id| &self.order1[id])),
            self.order0.stored(Self::order0_slot(sym)),
        )
    }

    pub fn order0_effective_total(&self) -> u32 {
        self.order0.effective_total()
    }

    pub fn estimated_bytes(&self) -> usize {
        let sparse: usize = self
            .order1
            .iter()
            .chain(&self.order2)
            .map(|c| c.table.estimated_bytes() + std::mem::size_of::<SelStats>())
            .sum();
        self.order0.estimated_bytes()
            + self.order1_ids.capacity() * 4
            + self.order2_ids.capacity() * (std::mem::size_of::<((u32, u32), u32)>() + 1)
            + sparse
    }

    /// Digest of the complete model state.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv::default();
        h.write_u32(self.history.0);
        h.write_u32(self.history.1);
        h.write_u64(self.indexes as u64);
        self.order0.hash_into(&mut h);
        let mut sel = |s: &SelStats| {
            h.write_u64(s.bits);
            h.write_u64(s.uses);
        };
        sel(&self.order0_sel);
        for c in self.order1.iter().chain(&self.order2) {
            sel(&c.sel);
        }
        for c in self.order1.iter().chain(&self.order2) {
            c.table.hash_into(&mut h);
        }
        for &id in &self.order1_ids {
            h.write_u32(id);
        }
        h.finish()
    }
}

fn lower(class: ContextClass) -> ContextClass {
    match class {
        ContextClass::Order2 => ContextClass::Order1,
        ContextClass::Order1 | ContextClass::Order0 => ContextClass::Order0,
    }
}
