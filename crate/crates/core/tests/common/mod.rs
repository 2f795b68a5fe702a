//! Reference implementations shared by the integration tests. They work on
//! plain `Vec<bool>` states and never call the library's update code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use bnrobot::{BooleanNetwork, NetworkState, TruthTable};

/// Next state computed directly from source lists and table rows.
pub fn oracle_step(sources: &[Vec<usize>], tables: &[Vec<bool>], state: &[bool]) -> Vec<bool> {
    sources
        .iter()
        .zip(tables)
        .map(|(src, table)| {
            let row = src
                .iter()
                .fold(0usize, |acc, &j| acc * 2 + usize::from(state[j]));
            table[row]
        })
        .collect()
}

/// Source lists and table rows of a network.
pub type NetworkParts = (Vec<Vec<usize>>, Vec<Vec<bool>>);

pub fn network_parts(net: &BooleanNetwork) -> NetworkParts {
    let tables = net
        .tables()
        .iter()
        .map(|t| (0..t.rows()).map(|r| t.get(r)).collect())
        .collect();
    (net.all_sources().to_vec(), tables)
}

pub fn bits_of(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

/// The cycle reached from `start`, as a set of states.
pub fn oracle_attractor(
    sources: &[Vec<usize>],
    tables: &[Vec<bool>],
    start: Vec<bool>,
) -> BTreeSet<Vec<bool>> {
    let mut path = vec![start];
    loop {
        let next = oracle_step(sources, tables, path.last().unwrap());
        if let Some(pos) = path.iter().position(|s| *s == next) {
            return path[pos..].iter().cloned().collect();
        }
        path.push(next);
    }
}

pub fn state_set(states: &[NetworkState]) -> BTreeSet<Vec<bool>> {
    states.iter().map(|s| s.to_bits()).collect()
}

fn parse_bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

/// Attractors of the three-node example: fixed points 000 and 111 and the
/// two-cycle {001, 010}.
pub fn fig1_attractors() -> BTreeSet<BTreeSet<Vec<bool>>> {
    [vec!["000"], vec!["111"], vec!["001", "010"]]
        .into_iter()
        .map(|c| c.into_iter().map(parse_bits).collect())
        .collect()
}

/// Every three-node network with two sources per node (self-loops allowed)
/// whose attractors are exactly [`fig1_attractors`], in enumeration order.
pub fn fig1_witnesses() -> Vec<NetworkParts> {
    let pairs = [vec![0, 1], vec![0, 2], vec![1, 2]];
    let target = fig1_attractors();
    let mut found = Vec::new();
    for code in 0..48usize.pow(3) {
        let mut sources = Vec::with_capacity(3);
        let mut tables = Vec::with_capacity(3);
        let mut c = code;
        for _ in 0..3 {
            let choice = c % 48;
            c /= 48;
            sources.push(pairs[choice / 16].clone());
            tables.push(bits_of(choice % 16, 4));
        }
        let attractors: BTreeSet<_> = (0..8)
            .map(|s| oracle_attractor(&sources, &tables, bits_of(s, 3)))
            .collect();
        if attractors == target {
            found.push((sources, tables));
        }
    }
    found
}

pub fn build(sources: Vec<Vec<usize>>, tables: &[Vec<bool>]) -> BooleanNetwork {
    let tables = tables
        .iter()
        .map(|t| TruthTable::from_rows(t).unwrap())
        .collect();
    BooleanNetwork::new(sources, tables, vec![], vec![]).unwrap()
}

/// Every node is a constant function of its predecessor.
pub fn constant(n: usize, value: bool) -> BooleanNetwork {
    let sources = (0..n).map(|i| vec![(i + n - 1) % n]).collect();
    build(sources, &vec![vec![value, value]; n])
}

/// Every node copies itself.
pub fn identity(n: usize) -> BooleanNetwork {
    let sources = (0..n).map(|i| vec![i]).collect();
    build(sources, &vec![vec![false, true]; n])
}
