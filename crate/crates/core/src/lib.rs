//! Simulation and optimization toolkit for micro-operator network slicing.
//!
//! A micro-operator (MO) owns small-cell base stations (SBSs) and a pool of
//! resource blocks (RBs). Each RB is packaged as a slice and handed to at most
//! one mobile network operator (MNO). The crate covers:
//!
//! - [`scenario`]: seeded small-cell topologies and channel gains,
//! - [`radio`]: SINR and rate evaluation under a slice allocation,
//! - [`qlearning`]: per-SBS tabular Q-learning over discrete power levels,
//! - [`matching`]: MCMC swap search for the welfare-maximizing allocation,
//! - [`mec`]: edge-computing delay model and greedy fractional knapsack,
//! - [`oracle`]: exhaustive and exact baselines used for verification,
//! - [`experiment`]: seeded, replicated experiment drivers.

// Negated float comparisons reject NaN inputs on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod matching;
pub mod mec;
pub mod oracle;
pub mod qlearning;
pub mod radio;
pub mod scenario;
pub mod seed;

pub use error::{Error, Result};
pub use matching::{Matching, McmcConfig, McmcOutcome, PowerMode, WelfareReading, WelfareTrace};
pub use mec::{DelayProfile, KnapsackSolution, MecConfig};
pub use qlearning::{PolicyKind, QLearningConfig, QTable, QosState};
pub use radio::{PowerAssignment, RateReport};
pub use scenario::{NetworkTopology, ScenarioConfig};
