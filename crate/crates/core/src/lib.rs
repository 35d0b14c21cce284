//! Multi-agent simulation of AI-enabled rent-seeking on an information
//! platform, with the analytical steady-state toolkit that goes with it.
//!
//! * [`model`]: pure payoff, detection, reputation, transition and loss functions
//! * [`agents`]: myopic, local-search and Q-learning decision policies
//! * [`equilibrium`]: steady states, comparative statics, stability, tax search
//! * [`engine`]: the deterministic round-by-round simulator
//! * [`sweeps`]: parameter grids, seed replication, sensitivity heatmaps, presets

pub mod agents;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod rng;
pub mod stats;
pub mod sweeps;

pub use engine::{run, RunResult, ScenarioConfig};
pub use error::{Error, Result};
pub use model::{DiscountParams, FineMode, ModelParams, PolicyParams};
