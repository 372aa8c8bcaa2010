//! Partially observable environments with explicit hidden variables.
//!
//! Observations are flat f64 vectors described by an
//! [`ObservationSchema`]. Hidden state is exposed only through
//! [`EnvInfo`], which analysis code may read but which never reaches a
//! policy input.

mod traffic;
mod warehouse;
mod wrappers;

pub use traffic::{TrafficConfig, TrafficEnv};
pub use warehouse::{
    dset_counter_oracle, memoryless_counter_guess, DsetCounterOracle, DsetRecord,
    WarehouseConfig, WarehouseEnv, NUM_ITEM_CELLS,
};
pub use wrappers::{flicker, FlickerWrapper, FrameStack, FrameStackWrapper};

use crate::dset::ObservationSchema;
use crate::error::Result;
use serde::{Deserialize, Serialize};

/// One transition. `info` is a hidden-state snapshot for oracles and
/// probes; the rollout path feeds policies only `obs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: EnvInfo,
}

/// Hidden-state snapshot, emitted once per step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EnvInfo {
    Warehouse {
        /// Hidden per-item timers.
        counters: Vec<u8>,
        item_active: Vec<bool>,
        /// Items collected during this step.
        pickups: Vec<bool>,
        agent: (usize, usize),
    },
    Traffic {
        /// Full occupancy: visible A, hidden loop A, visible B, hidden
        /// loop B, in that order.
        occupancy: Vec<bool>,
        green_a: bool,
        yellow: u8,
    },
    None,
}

impl EnvInfo {
    /// Ground-truth quantities for analysis, as a labeled vector.
    /// Warehouse: the 24 hidden counters. Traffic: full occupancy
    /// including the hidden loops.
    pub fn feature_vector(&self) -> Vec<f64> {
        match self {
            EnvInfo::Warehouse { counters, .. } => {
                counters.iter().map(|c| *c as f64).collect()
            }
            EnvInfo::Traffic { occupancy, .. } => {
                occupancy.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()
            }
            EnvInfo::None => Vec::new(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self {
            EnvInfo::Warehouse { counters, .. } => {
                (0..counters.len()).map(|i| format!("counter_{i}")).collect()
            }
            EnvInfo::Traffic { occupancy, .. } => {
                (0..occupancy.len()).map(|i| format!("cell_{i}")).collect()
            }
            EnvInfo::None => Vec::new(),
        }
    }
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn schema(&self) -> &ObservationSchema;
    /// The hand-specified d-set for this environment.
    fn manual_dset_indices(&self) -> Vec<usize>;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<EnvStep>;
    /// Snapshot of the current hidden state.
    fn info(&self) -> EnvInfo;
}
