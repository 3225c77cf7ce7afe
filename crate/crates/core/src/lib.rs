//! Discrete-time simulator of energy-limited mobile networks.
//!
//! Nodes move on a periodic square, forward packets hop by hop with an
//! energy- and distance-aware probabilistic next-hop rule, and pay a fixed
//! energy cost per hop. The network dies with its first exhausted node. The
//! crate records the congestion dynamics of each run, classifies it into one
//! of four traffic states, and compares the observed lifetime with the
//! closed-form lifetime model.

pub mod config;
pub mod critical;
pub mod error;
pub mod grid;
pub mod harness;
pub mod lifetime;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod traffic;
pub mod world;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use grid::GridIndex;
pub use harness::{run_replicas, run_simulation, sweep, ReplicaRow, RunSummary, SweepParam, SweepTable};
pub use metrics::{ClassifierThresholds, RunSeries, StepRecord, TrafficState};
pub use traffic::{Network, NodeState, Packet};
pub use world::{Kinematics, Point};
