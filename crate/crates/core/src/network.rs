//! Boolean networks with synchronous, deterministic update.
//!
//! A network of `n` nodes is described by, for every node, an ordered list of
//! source nodes and a truth table with one output bit per combination of the
//! source values. Row indices are formed by reading the sources in list order
//! with the first listed source as the most significant bit, so a node with
//! sources `[a, b, c]` looks up row `4·x_a + 2·x_b + x_c`.
//!
//! States are packed into a single `u64`, which bounds networks at
//! [`MAX_NODES`] nodes.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Largest supported node count (one packed machine word per state).
pub const MAX_NODES: usize = 64;

/// Largest supported in-degree; a table holds `2^k` rows.
pub const MAX_IN_DEGREE: usize = 16;

/// The values of all nodes of a network at one time step.
///
/// Bit `i` of the packed word is the value of node `i`. Ordering is
/// lexicographic over the tuple `(x_0, x_1, …)`, which is the order used to
/// pick canonical attractor rotations.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetworkState {
    bits: u64,
    len: u8,
}

impl NetworkState {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_NODES, "state length {len} exceeds {MAX_NODES}");
        NetworkState {
            bits: 0,
            len: len as u8,
        }
    }

    /// Build from a packed word; bits at or above `len` are discarded.
    pub fn from_packed(bits: u64, len: usize) -> Self {
        assert!(len <= MAX_NODES, "state length {len} exceeds {MAX_NODES}");
        NetworkState {
            bits: bits & mask(len),
            len: len as u8,
        }
    }

    pub fn from_bits(values: &[bool]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            s.set(i, v);
        }
        s
    }

    /// Parse a string of `0`/`1` characters, node 0 first.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(
                    "state",
                    format!("unexpected character {other:?}"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() > MAX_NODES {
            return Err(Error::parse("state", format!("more than {MAX_NODES} bits")));
        }
        Ok(Self::from_bits(&values))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.bits >> i) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len(),
            "node {i} out of range for state of length {}",
            self.len
        );
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    #[inline]
    pub fn packed(&self) -> u64 {
        self.bits
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Key whose numeric order equals the lexicographic tuple order.
    fn lex_key(&self) -> u64 {
        if self.len == 0 {
            0
        } else {
            self.bits.reverse_bits() >> (64 - self.len as u32)
        }
    }
}

impl Ord for NetworkState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.lex_key().cmp(&other.lex_key()))
    }
}

impl PartialOrd for NetworkState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NetworkState({self})")
    }
}

#[inline]
pub(crate) fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Output column of a Boolean function of `arity` inputs.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TruthTable {
    arity: usize,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn constant(arity: usize, value: bool) -> Self {
        let rows = 1usize << arity;
        let mut words = vec![if value { u64::MAX } else { 0 }; rows.div_ceil(64)];
        if rows < 64 {
            words[0] &= mask(rows);
        }
        TruthTable { arity, words }
    }

    /// Table from its output column, row 0 first.
    pub fn from_rows(rows: &[bool]) -> Result<Self> {
        if !rows.len().is_power_of_two() {
            return Err(Error::param(
                "table",
                format!("length {} is not a power of two", rows.len()),
            ));
        }
        let arity = rows.len().trailing_zeros() as usize;
        if arity > MAX_IN_DEGREE {
            return Err(Error::param(
                "table",
                format!("arity {arity} exceeds {MAX_IN_DEGREE}"),
            ));
        }
        let mut t = Self::constant(arity, false);
        for (r, &v) in rows.iter().enumerate() {
            if v {
                t.flip(r);
            }
        }
        Ok(t)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> usize {
        1 << self.arity
    }

    #[inline]
    pub fn get(&self, row: usize) -> bool {
        (self.words[row >> 6] >> (row & 63)) & 1 == 1
    }

    #[inline]
    pub fn flip(&mut self, row: usize) {
        self.words[row >> 6] ^= 1 << (row & 63);
    }

    /// Row 0 first, as `0`/`1` characters.
    pub fn to_bitstring(&self) -> String {
        (0..self.rows())
            .map(|r| if self.get(r) { '1' } else { '0' })
            .collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

/// A Boolean network: topology, node functions and designated input/output
/// node sets.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BooleanNetwork {
    sources: Vec<Vec<usize>>,
    tables: Vec<TruthTable>,
    input_nodes: Vec<usize>,
    output_nodes: Vec<usize>,
}

impl BooleanNetwork {
    /// Build and validate a network.
    pub fn new(
        sources: Vec<Vec<usize>>,
        tables: Vec<TruthTable>,
        input_nodes: Vec<usize>,
        output_nodes: Vec<usize>,
    ) -> Result<Self> {
        let n = sources.len();
        if n == 0 || n > MAX_NODES {
            return Err(Error::param("n", format!("{n} not in [1, {MAX_NODES}]")));
        }
        if tables.len() != n {
            return Err(Error::param(
                "tables",
                format!("{} tables for {n} nodes", tables.len()),
            ));
        }
        for (i, (src, table)) in sources.iter().zip(&tables).enumerate() {
            if src.len() > MAX_IN_DEGREE {
                return Err(Error::param(
                    format!("inputs[{i}]"),
                    format!("in-degree {} exceeds {MAX_IN_DEGREE}", src.len()),
                ));
            }
            if let Some(&bad) = src.iter().find(|&&s| s >= n) {
                return Err(Error::param(
                    format!("inputs[{i}]"),
                    format!("source {bad} out of range [0, {n})"),
                ));
            }
            if table.arity() != src.len() {
                return Err(Error::param(
                    format!("tables[{i}]"),
                    format!(
                        "{} rows but node has {} sources (expected {})",
                        table.rows(),
                        src.len(),
                        1usize << src.len()
                    ),
                ));
            }
        }
        let mut net = BooleanNetwork {
            sources,
            tables,
            input_nodes: Vec::new(),
            output_nodes: Vec::new(),
        };
        net.set_roles(input_nodes, output_nodes)?;
        Ok(net)
    }

    /// Random topology with exactly `k` distinct sources per node and
    /// uniformly random truth tables.
    pub fn random(n: usize, k: usize, no_self: bool, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::param("n", format!("{n} not in [1, {MAX_NODES}]")));
        }
        let max_k = if no_self { n - 1 } else { n };
        if k == 0 || k > max_k {
            return Err(Error::param(
                "k",
                format!("{k} not in [1, {max_k}] for n = {n} (no_self = {no_self})"),
            ));
        }
        if k > MAX_IN_DEGREE {
            return Err(Error::param("k", format!("{k} exceeds {MAX_IN_DEGREE}")));
        }
        let mut rng = seed::rng(seed);
        let mut sources = Vec::with_capacity(n);
        for i in 0..n {
            let src: Vec<usize> = if no_self {
                index::sample(&mut rng, n - 1, k)
                    .into_iter()
                    .map(|j| if j >= i { j + 1 } else { j })
                    .collect()
            } else {
                index::sample(&mut rng, n, k).into_vec()
            };
            sources.push(src);
        }
        let tables = (0..n)
            .map(|_| {
                let rows: Vec<bool> = (0..1usize << k).map(|_| rng.gen::<bool>()).collect();
                TruthTable::from_rows(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        BooleanNetwork::new(sources, tables, Vec::new(), Vec::new())
    }

    /// Replace the designated input and output node sets.
    pub fn set_roles(&mut self, input_nodes: Vec<usize>, output_nodes: Vec<usize>) -> Result<()> {
        let n = self.n();
        for (field, nodes) in [
            ("input_nodes", &input_nodes),
            ("output_nodes", &output_nodes),
        ] {
            for (pos, &v) in nodes.iter().enumerate() {
                if v >= n {
                    return Err(Error::param(
                        field,
                        format!("node {v} out of range [0, {n})"),
                    ));
                }
                if nodes[..pos].contains(&v) {
                    return Err(Error::param(field, format!("node {v} listed twice")));
                }
            }
        }
        if let Some(v) = input_nodes.iter().find(|v| output_nodes.contains(v)) {
            return Err(Error::param(
                "output_nodes",
                format!("node {v} is also an input node"),
            ));
        }
        self.input_nodes = input_nodes;
        self.output_nodes = output_nodes;
        Ok(())
    }

    pub fn with_roles(mut self, input_nodes: Vec<usize>, output_nodes: Vec<usize>) -> Result<Self> {
        self.set_roles(input_nodes, output_nodes)?;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self, node: usize) -> &[usize] {
        &self.sources[node]
    }

    pub fn all_sources(&self) -> &[Vec<usize>] {
        &self.sources
    }

    pub fn table(&self, node: usize) -> &TruthTable {
        &self.tables[node]
    }

    pub fn tables(&self) -> &[TruthTable] {
        &self.tables
    }

    pub fn input_nodes(&self) -> &[usize] {
        &self.input_nodes
    }

    pub fn output_nodes(&self) -> &[usize] {
        &self.output_nodes
    }

    /// Row of `node`'s table selected by the packed state.
    #[inline]
    pub fn row(&self, node: usize, packed: u64) -> usize {
        self.sources[node]
            .iter()
            .fold(0usize, |row, &s| (row << 1) | ((packed >> s) & 1) as usize)
    }

    /// Value `node` takes after one update from the packed state.
    #[inline]
    pub fn eval_node(&self, node: usize, packed: u64) -> bool {
        self.tables[node].get(self.row(node, packed))
    }

    /// One synchronous step on a packed state.
    #[inline]
    pub fn advance(&self, packed: u64) -> u64 {
        (0..self.n()).fold(0u64, |next, i| {
            next | ((self.eval_node(i, packed) as u64) << i)
        })
    }

    /// One synchronous update of every node.
    pub fn step(&self, state: &NetworkState) -> Result<NetworkState> {
        if state.len() != self.n() {
            return Err(Error::Contract(format!(
                "state has {} bits, network has {} nodes",
                state.len(),
                self.n()
            )));
        }
        Ok(NetworkState::from_packed(
            self.advance(state.packed()),
            self.n(),
        ))
    }

    fn check_move(&self, node: usize, row: usize) -> Result<()> {
        if node >= self.n() {
            return Err(Error::param(
                "node",
                format!("{node} out of range [0, {})", self.n()),
            ));
        }
        let rows = self.tables[node].rows();
        if row >= rows {
            return Err(Error::param(
                "row",
                format!("{row} out of range [0, {rows}) for node {node}"),
            ));
        }
        Ok(())
    }

    /// Copy of this network with one truth-table bit inverted.
    pub fn flip_table_bit(&self, node: usize, row: usize) -> Result<BooleanNetwork> {
        let mut out = self.clone();
        out.toggle_table_bit(node, row)?;
        Ok(out)
    }

    /// In-place variant of [`flip_table_bit`](Self::flip_table_bit).
    pub fn toggle_table_bit(&mut self, node: usize, row: usize) -> Result<()> {
        self.check_move(node, row)?;
        self.tables[node].flip(row);
        Ok(())
    }

    /// Concatenated table bitstrings, node 0 first.
    pub fn table_bits(&self) -> String {
        self.tables.iter().map(TruthTable::to_bitstring).collect()
    }

    /// Total number of truth-table rows, i.e. the size of the move neighbourhood.
    pub fn total_rows(&self) -> usize {
        self.tables.iter().map(TruthTable::rows).sum()
    }
}

/// Random network; see [`BooleanNetwork::random`].
pub fn random_network(n: usize, k: usize, no_self: bool, seed: u64) -> Result<BooleanNetwork> {
    BooleanNetwork::random(n, k, no_self, seed)
}

/// One synchronous update; see [`BooleanNetwork::step`].
pub fn synchronous_step(net: &BooleanNetwork, state: &NetworkState) -> Result<NetworkState> {
    net.step(state)
}

/// Initial controller state. `None` gives all zeros; `Some(seed)` gives
/// independent fair bits drawn from that seed.
pub fn initial_state(net: &BooleanNetwork, seed: Option<u64>) -> NetworkState {
    match seed {
        None => NetworkState::zeros(net.n()),
        Some(s) => {
            let mut rng = seed::rng(seed::derive(s, seed::stream::INITIAL_STATE, 0));
            NetworkState::from_packed(rng.gen::<u64>(), net.n())
        }
    }
}
