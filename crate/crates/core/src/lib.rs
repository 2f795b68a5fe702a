//! Boolean-network robot controllers designed by stochastic local search.
//!
//! A Boolean network drives a simulated differential-drive robot in a square
//! arena with a light in one corner. The robot must approach the light until
//! it hears a single clap and move away from it afterwards, so the network
//! has to latch the clap in its own state. Networks are designed by flipping
//! single truth-table bits and keeping every flip that does not increase the
//! training error.
//!
//! Module map:
//!
//! * [`network`] and [`dynamics`]: networks, synchronous update, attractors
//! * [`netfile`]: JSON network files
//! * [`arena`]: arena, kinematics, light sectors, toward/away labels
//! * [`coupling`]: sensor clamping and wheel decoding
//! * [`episode`] and [`objective`]: closed-loop trials and their error
//! * [`search`]: two-stage stochastic descent
//! * [`harness`] and [`stats`]: repeated designs, testing and quartiles

pub mod arena;
pub mod coupling;
pub mod dynamics;
pub mod episode;
pub mod error;
pub mod harness;
pub mod netfile;
pub mod network;
pub mod objective;
pub mod search;
pub mod seed;
pub mod stats;

pub use arena::{ArenaConfig, Point, RobotPose, Stage, StepLabel, TrialSpec, WheelCommand};
pub use coupling::{Controller, NodeLayout, SensorFrame};
pub use dynamics::{enumerate_attractors, trajectory, AttractorInfo};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, RunSummary};
pub use network::{BooleanNetwork, NetworkState, TruthTable};
pub use objective::{aggregate_error, trial_error, ErrorReport, TrialTrace};
pub use search::{stochastic_descent, SearchConfig, SearchResult};
