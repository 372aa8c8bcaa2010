//! Influence-aware memory (IAM) laboratory.
//!
//! A self-contained reinforcement-learning toolkit built around a policy
//! architecture that runs a feedforward channel in parallel with a
//! recurrent channel whose input is restricted to the observation
//! variables that influence hidden state. The crate bundles:
//!
//! - a minimal dense-tensor engine with reverse-mode differentiation
//!   ([`graph`]),
//! - parameterized layers and d-set selectors ([`layers`], [`dset`]),
//! - the IAM policy plus LSTM and frame-stack baselines ([`policy`]),
//! - two partially observable environments with explicit hidden state
//!   ([`env`]),
//! - a recurrent PPO trainer with sequence chunking ([`ppo`]),
//! - representation analysis: CCA, memory decoding, linear probes
//!   ([`analysis`]).
//!
//! All math is 64-bit and deterministic given a seed. Data-parallel
//! sections (rollout workers, per-chunk gradients) go through [`exec`],
//! which uses rayon when the `parallel` feature is enabled and falls
//! back to sequential iteration otherwise; results are bit-identical
//! either way because reductions happen in fixed index order.

pub mod analysis;
pub mod checkpoint;
pub mod dset;
pub mod env;
pub mod error;
pub mod exec;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod params;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
