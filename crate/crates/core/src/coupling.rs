//! Network/robot interface: sensor readings are clamped onto input nodes,
//! the network is updated once, output nodes drive the wheels.

use crate::arena::WheelCommand;
use crate::error::{Error, Result};
use crate::network::{BooleanNetwork, NetworkState};

/// Role tags used in network files, input nodes first.
pub const INPUT_ROLES: [&str; 5] = ["sound", "light0", "light1", "light2", "light3"];
pub const OUTPUT_ROLES: [&str; 2] = ["wheel_left", "wheel_right"];

/// Which node carries which sensor or actuator signal.
///
/// `light[0]` receives the most significant bit of the Gray-coded sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeLayout {
    pub sound: usize,
    pub light: [usize; 4],
    pub wheel_left: usize,
    pub wheel_right: usize,
}

impl NodeLayout {
    /// x_1 sound, x_2..x_5 light, x_6 left wheel, x_7 right wheel
    /// (zero-based nodes 0..=6).
    pub const fn standard() -> Self {
        NodeLayout {
            sound: 0,
            light: [1, 2, 3, 4],
            wheel_left: 5,
            wheel_right: 6,
        }
    }

    pub fn input_nodes(&self) -> Vec<usize> {
        let mut v = vec![self.sound];
        v.extend_from_slice(&self.light);
        v
    }

    pub fn output_nodes(&self) -> Vec<usize> {
        vec![self.wheel_left, self.wheel_right]
    }

    /// Read the layout from a network's input/output node lists
    /// (inputs ordered sound, light0..3; outputs left, right).
    pub fn from_network(net: &BooleanNetwork) -> Result<Self> {
        let (i, o) = (net.input_nodes(), net.output_nodes());
        if i.len() != INPUT_ROLES.len() || o.len() != OUTPUT_ROLES.len() {
            return Err(Error::Contract(format!(
                "controller needs 5 input nodes and 2 output nodes, network has {} and {}",
                i.len(),
                o.len()
            )));
        }
        Ok(NodeLayout {
            sound: i[0],
            light: [i[1], i[2], i[3], i[4]],
            wheel_left: o[0],
            wheel_right: o[1],
        })
    }
}

/// What the robot perceives at one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SensorFrame {
    /// Light sector, 1..=8.
    pub sector: u8,
    pub sound: bool,
}

/// Binary-reflected Gray code of a sector id, most significant bit first.
pub fn gray_encode(sector: u8) -> Result<[bool; 4]> {
    if !(1..=8).contains(&sector) {
        return Err(Error::param("sector", format!("{sector} not in 1..=8")));
    }
    let g = sector ^ (sector >> 1);
    Ok([g & 8 != 0, g & 4 != 0, g & 2 != 0, g & 1 != 0])
}

/// A network bound to a node layout, with per-sector clamp patterns
/// precomputed.
#[derive(Clone, Debug)]
pub struct Controller<'a> {
    net: &'a BooleanNetwork,
    layout: NodeLayout,
    clamp_mask: u64,
    sound_bit: u64,
    sector_bits: [u64; 9],
    gates: Vec<Gate>,
    wide_nodes: Vec<usize>,
    /// Shared in-degree of all gates, when there is one.
    uniform_arity: Option<usize>,
}

/// Largest in-degree whose table fits in a single gate word.
const GATE_ARITY: usize = 6;

/// A non-input node with its table copied inline.
#[derive(Clone, Copy, Debug)]
struct Gate {
    node: u8,
    arity: u8,
    sources: [u8; GATE_ARITY],
    table: u64,
}

impl Gate {
    #[inline(always)]
    fn row(&self, packed: u64) -> usize {
        self.sources[..self.arity as usize]
            .iter()
            .fold(0u64, |row, &s| (row << 1) | ((packed >> s) & 1)) as usize
    }
}

impl<'a> Controller<'a> {
    pub fn new(net: &'a BooleanNetwork) -> Result<Self> {
        let layout = NodeLayout::from_network(net)?;
        let sound_bit = 1u64 << layout.sound;
        let light_mask = layout.light.iter().fold(0u64, |m, &i| m | (1 << i));
        let mut sector_bits = [0u64; 9];
        for (sector, bits) in sector_bits.iter_mut().enumerate().skip(1) {
            let code = gray_encode(sector as u8)?;
            *bits = layout
                .light
                .iter()
                .zip(code)
                .filter(|(_, b)| *b)
                .fold(0u64, |m, (&i, _)| m | (1 << i));
        }
        let clamp_mask = sound_bit | light_mask;
        let mut gates = Vec::new();
        let mut wide_nodes = Vec::new();
        for i in (0..net.n()).filter(|i| clamp_mask & (1 << i) == 0) {
            let src = net.sources(i);
            if src.len() <= GATE_ARITY {
                let mut sources = [0u8; GATE_ARITY];
                for (d, &s) in sources.iter_mut().zip(src) {
                    *d = s as u8;
                }
                let table = (0..net.table(i).rows())
                    .filter(|&r| net.table(i).get(r))
                    .fold(0u64, |t, r| t | (1 << r));
                gates.push(Gate {
                    node: i as u8,
                    arity: src.len() as u8,
                    sources,
                    table,
                });
            } else {
                wide_nodes.push(i);
            }
        }
        let uniform_arity = match gates.first() {
            Some(g) if wide_nodes.is_empty() && gates.iter().all(|h| h.arity == g.arity) => {
                Some(g.arity as usize)
            }
            _ => None,
        };
        Ok(Controller {
            net,
            layout,
            clamp_mask,
            sound_bit,
            sector_bits,
            gates,
            wide_nodes,
            uniform_arity,
        })
    }

    pub fn network(&self) -> &BooleanNetwork {
        self.net
    }

    pub fn layout(&self) -> NodeLayout {
        self.layout
    }

    /// Nodes whose values are imposed by sensors.
    pub fn clamp_mask(&self) -> u64 {
        self.clamp_mask
    }

    /// Overwrite the input nodes of a packed state with the frame's encoding.
    #[inline]
    pub fn clamp(&self, packed: u64, frame: SensorFrame) -> u64 {
        debug_assert!((1..=8).contains(&frame.sector));
        let sound = if frame.sound { self.sound_bit } else { 0 };
        (packed & !self.clamp_mask) | sound | self.sector_bits[frame.sector as usize]
    }

    /// Clamp, update every non-input node synchronously, read the wheels.
    /// Input nodes keep their clamped values; their tables are not
    /// evaluated.
    #[inline]
    pub fn step_packed(&self, packed: u64, frame: SensorFrame) -> (u64, WheelCommand) {
        self.step_packed_tracking(packed, frame, |_, _| {})
    }

    /// Like [`step_packed`](Self::step_packed) but also reports each
    /// `(node, row)` table lookup to `visit`.
    #[inline]
    pub fn step_packed_tracking(
        &self,
        packed: u64,
        frame: SensorFrame,
        visit: impl FnMut(usize, usize),
    ) -> (u64, WheelCommand) {
        let clamped = self.clamp(packed, frame);
        let next = match self.uniform_arity {
            Some(1) => self.update_fixed::<1>(clamped, visit),
            Some(2) => self.update_fixed::<2>(clamped, visit),
            Some(3) => self.update_fixed::<3>(clamped, visit),
            Some(4) => self.update_fixed::<4>(clamped, visit),
            _ => self.update_general(clamped, visit),
        };
        let cmd = WheelCommand {
            left: (next >> self.layout.wheel_left) & 1 == 1,
            right: (next >> self.layout.wheel_right) & 1 == 1,
        };
        (next, cmd)
    }

    #[inline(always)]
    fn update_fixed<const K: usize>(
        &self,
        clamped: u64,
        mut visit: impl FnMut(usize, usize),
    ) -> u64 {
        let mut next = clamped & self.clamp_mask;
        for g in &self.gates {
            let mut row = 0u64;
            for &s in &g.sources[..K] {
                row = (row << 1) | ((clamped >> s) & 1);
            }
            visit(g.node as usize, row as usize);
            next |= ((g.table >> row) & 1) << g.node;
        }
        next
    }

    #[inline(always)]
    fn update_general(&self, clamped: u64, mut visit: impl FnMut(usize, usize)) -> u64 {
        let mut next = clamped & self.clamp_mask;
        for g in &self.gates {
            let row = g.row(clamped);
            visit(g.node as usize, row);
            next |= ((g.table >> row) & 1) << g.node;
        }
        for &i in &self.wide_nodes {
            let row = self.net.row(i, clamped);
            visit(i, row);
            next |= (self.net.table(i).get(row) as u64) << i;
        }
        next
    }

    pub fn step(
        &self,
        state: &NetworkState,
        frame: SensorFrame,
    ) -> Result<(NetworkState, WheelCommand)> {
        if state.len() != self.net.n() {
            return Err(Error::Contract(format!(
                "state has {} bits, network has {} nodes",
                state.len(),
                self.net.n()
            )));
        }
        if !(1..=8).contains(&frame.sector) {
            return Err(Error::param(
                "sector",
                format!("{} not in 1..=8", frame.sector),
            ));
        }
        let (next, cmd) = self.step_packed(state.packed(), frame);
        Ok((NetworkState::from_packed(next, self.net.n()), cmd))
    }
}

/// One sense/update/act cycle.
pub fn controller_step(
    net: &BooleanNetwork,
    state: &NetworkState,
    frame: SensorFrame,
) -> Result<(NetworkState, WheelCommand)> {
    Controller::new(net)?.step(state, frame)
}

/// Random network with the standard sensor/actuator layout.
pub fn random_controller_network(n: usize, k: usize, seed: u64) -> Result<BooleanNetwork> {
    let layout = NodeLayout::standard();
    if n < 7 {
        return Err(Error::param("n", format!("{n} too small for 7 role nodes")));
    }
    BooleanNetwork::random(n, k, true, seed)?
        .with_roles(layout.input_nodes(), layout.output_nodes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::TruthTable;

    fn bits(code: [bool; 4]) -> String {
        code.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    #[test]
    fn gray_anchors() {
        assert_eq!(bits(gray_encode(1).unwrap()), "0001");
        assert_eq!(bits(gray_encode(2).unwrap()), "0011");
        assert_eq!(bits(gray_encode(8).unwrap()), "1100");
        assert!(gray_encode(0).is_err());
        assert!(gray_encode(9).is_err());
    }

    #[test]
    fn gray_adjacency() {
        for s in 1..8u8 {
            let a = gray_encode(s).unwrap();
            let b = gray_encode(s + 1).unwrap();
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
        }
    }

    /// Seven-node net: node 5 copies the sound node, node 6 is constant 1.
    fn sound_follower() -> BooleanNetwork {
        let mut sources: Vec<Vec<usize>> = (0..7).map(|i| vec![i]).collect();
        sources[5] = vec![0];
        let copy = TruthTable::from_rows(&[false, true]).unwrap();
        let mut tables: Vec<TruthTable> = (0..7).map(|_| TruthTable::constant(1, false)).collect();
        tables[5] = copy;
        tables[6] = TruthTable::constant(1, true);
        let layout = NodeLayout::standard();
        BooleanNetwork::new(sources, tables, layout.input_nodes(), layout.output_nodes()).unwrap()
    }

    #[test]
    fn left_wheel_follows_clap_pulse() {
        let net = sound_follower();
        let ctl = Controller::new(&net).unwrap();
        let mut s = NetworkState::zeros(7);
        let mut lefts = Vec::new();
        for t in 1..=5 {
            let frame = SensorFrame {
                sector: 3,
                sound: t == 3,
            };
            let (next, cmd) = ctl.step(&s, frame).unwrap();
            assert!(cmd.right);
            lefts.push(cmd.left);
            s = next;
        }
        assert_eq!(lefts, vec![false, false, true, false, false]);
    }

    #[test]
    fn constant_outputs_drive_forward() {
        let mut net = random_controller_network(20, 3, 8).unwrap();
        for node in [5, 6] {
            for row in 0..8 {
                if !net.table(node).get(row) {
                    net.toggle_table_bit(node, row).unwrap();
                }
            }
        }
        let ctl = Controller::new(&net).unwrap();
        let mut s = NetworkState::zeros(20);
        for sector in 1..=8 {
            let (next, cmd) = ctl
                .step(
                    &s,
                    SensorFrame {
                        sector,
                        sound: false,
                    },
                )
                .unwrap();
            assert_eq!(cmd, WheelCommand::FORWARD);
            s = next;
        }
    }

    #[test]
    fn clamped_inputs_survive_the_update() {
        let net = random_controller_network(20, 3, 21).unwrap();
        let ctl = Controller::new(&net).unwrap();
        for sector in 1..=8u8 {
            for sound in [false, true] {
                let frame = SensorFrame { sector, sound };
                let (next, _) = ctl.step_packed(0xfffff, frame);
                assert_eq!(next & ctl.clamp_mask(), ctl.clamp(0, frame));
            }
        }
    }

    #[test]
    fn clamping_is_idempotent() {
        let net = random_controller_network(20, 3, 2).unwrap();
        let ctl = Controller::new(&net).unwrap();
        let frame = SensorFrame {
            sector: 6,
            sound: true,
        };
        let once = ctl.clamp(0xabcde, frame);
        assert_eq!(ctl.clamp(once, frame), once);
    }

    #[test]
    fn rejects_wrong_layout() {
        let net = BooleanNetwork::random(20, 3, true, 1).unwrap();
        assert!(Controller::new(&net).is_err());
    }

    #[test]
    fn deterministic() {
        let net = random_controller_network(20, 3, 4).unwrap();
        let s = NetworkState::from_packed(0x1234, 20);
        let f = SensorFrame {
            sector: 2,
            sound: false,
        };
        assert_eq!(
            controller_step(&net, &s, f).unwrap(),
            controller_step(&net, &s, f).unwrap()
        );
    }
}
