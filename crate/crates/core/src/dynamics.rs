//! State-space analysis: trajectories, attractors and basins of attraction.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{mask, BooleanNetwork, NetworkState};
use crate::seed;

/// Largest node count accepted by exhaustive enumeration (2^24 states).
pub const MAX_EXHAUSTIVE_NODES: usize = 24;

/// Where a trajectory first revisits a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Repeat {
    /// Index of the first occurrence of the revisited state (cycle entry).
    pub entry: usize,
    /// Step at which that state recurs.
    pub at: usize,
}

impl Repeat {
    pub fn period(&self) -> usize {
        self.at - self.entry
    }
}

/// Successive states `states[0] = start, states[t+1] = step(states[t])`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<NetworkState>,
    pub repeat: Option<Repeat>,
}

impl Trajectory {
    /// The cycle the trajectory fell into, in canonical rotation.
    pub fn attractor(&self) -> Option<Vec<NetworkState>> {
        self.repeat
            .map(|r| canonical_rotation(self.states[r.entry..r.at].to_vec()))
    }
}

/// Simulate up to `max_steps` steps, stopping at the first revisited state.
pub fn trajectory(
    net: &BooleanNetwork,
    start: &NetworkState,
    max_steps: usize,
) -> Result<Trajectory> {
    if max_steps == 0 {
        return Err(Error::param("max_steps", "must be at least 1"));
    }
    let mut seen: HashMap<NetworkState, usize> = HashMap::new();
    let mut states = vec![*start];
    seen.insert(*start, 0);
    let mut cur = *start;
    for t in 1..=max_steps {
        cur = net.step(&cur)?;
        states.push(cur);
        if let Some(&entry) = seen.get(&cur) {
            return Ok(Trajectory {
                states,
                repeat: Some(Repeat { entry, at: t }),
            });
        }
        seen.insert(cur, t);
    }
    Ok(Trajectory {
        states,
        repeat: None,
    })
}

/// Rotate a cycle so that its lexicographically smallest state comes first.
pub fn canonical_rotation(mut cycle: Vec<NetworkState>) -> Vec<NetworkState> {
    if let Some((pos, _)) = cycle.iter().enumerate().min_by_key(|(_, s)| **s) {
        cycle.rotate_left(pos);
    }
    cycle
}

/// One attractor of a network together with its basin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttractorInfo {
    /// Cycle states, smallest first, each the successor of the previous.
    pub cycle: Vec<NetworkState>,
    /// Number of states whose trajectory ends in this cycle.
    pub basin_size: u64,
}

impl AttractorInfo {
    pub fn period(&self) -> usize {
        self.cycle.len()
    }

    pub fn is_fixed_point(&self) -> bool {
        self.cycle.len() == 1
    }
}

/// Full basin assignment produced by exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct AttractorMap {
    pub attractors: Vec<AttractorInfo>,
    /// `assignment[s]` is the index into `attractors` for packed state `s`.
    pub assignment: Vec<u32>,
}

impl AttractorMap {
    pub fn attractor_of(&self, state: &NetworkState) -> &AttractorInfo {
        &self.attractors[self.assignment[state.packed() as usize] as usize]
    }
}

const UNVISITED: u32 = u32::MAX;
const ON_PATH: u32 = u32::MAX - 1;

/// Exhaustively sweep all `2^n` states and return the attractor each one
/// reaches.
pub fn attractor_map(net: &BooleanNetwork) -> Result<AttractorMap> {
    let n = net.n();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::Capacity(format!(
            "exhaustive attractor enumeration supports at most {MAX_EXHAUSTIVE_NODES} nodes, \
             network has {n}; use sampled mode instead"
        )));
    }
    let size = 1usize << n;
    let m = mask(n);
    let mut label = vec![UNVISITED; size];
    let mut cycles: Vec<Vec<u64>> = Vec::new();
    let mut path: Vec<u64> = Vec::new();

    for start in 0..size {
        if label[start] != UNVISITED {
            continue;
        }
        path.clear();
        let mut cur = start as u64;
        while label[cur as usize] == UNVISITED {
            label[cur as usize] = ON_PATH;
            path.push(cur);
            cur = net.advance(cur) & m;
        }
        let id = if label[cur as usize] == ON_PATH {
            let pos = path
                .iter()
                .rposition(|&s| s == cur)
                .expect("state on current path");
            cycles.push(path[pos..].to_vec());
            (cycles.len() - 1) as u32
        } else {
            label[cur as usize]
        };
        for &s in &path {
            label[s as usize] = id;
        }
    }

    let mut basins = vec![0u64; cycles.len()];
    for &l in &label {
        basins[l as usize] += 1;
    }

    let mut infos: Vec<(usize, AttractorInfo)> = cycles
        .into_iter()
        .zip(basins)
        .enumerate()
        .map(|(id, (cycle, basin_size))| {
            let cycle = canonical_rotation(
                cycle
                    .into_iter()
                    .map(|s| NetworkState::from_packed(s, n))
                    .collect(),
            );
            (id, AttractorInfo { cycle, basin_size })
        })
        .collect();
    infos.sort_by(|a, b| a.1.cycle[0].cmp(&b.1.cycle[0]));

    let mut remap = vec![0u32; infos.len()];
    for (new_id, (old_id, _)) in infos.iter().enumerate() {
        remap[*old_id] = new_id as u32;
    }
    for l in &mut label {
        *l = remap[*l as usize];
    }
    Ok(AttractorMap {
        attractors: infos.into_iter().map(|(_, a)| a).collect(),
        assignment: label,
    })
}

/// All attractors with exact basin sizes, sorted by their first state.
pub fn enumerate_attractors(net: &BooleanNetwork) -> Result<Vec<AttractorInfo>> {
    attractor_map(net).map(|m| m.attractors)
}

/// An attractor found by random sampling, with the number of samples that
/// reached it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledAttractor {
    pub cycle: Vec<NetworkState>,
    pub hits: u64,
}

/// Attractors reached from `samples` uniformly random start states.
///
/// Works for any network size. Samples that do not repeat within
/// `max_steps` are left out of the tally.
pub fn sample_attractors(
    net: &BooleanNetwork,
    samples: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<SampledAttractor>> {
    let mut rng = seed::rng(seed);
    let mut tally: BTreeMap<Vec<NetworkState>, u64> = BTreeMap::new();
    for _ in 0..samples {
        let start = NetworkState::from_packed(rng.gen::<u64>(), net.n());
        if let Some(cycle) = trajectory(net, &start, max_steps)?.attractor() {
            *tally.entry(cycle).or_default() += 1;
        }
    }
    Ok(tally
        .into_iter()
        .map(|(cycle, hits)| SampledAttractor { cycle, hits })
        .collect())
}
