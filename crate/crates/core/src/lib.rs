//! Evidence-accumulator decision making for reinforcement-learning agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: the Mode Estimation task (hidden mode, noisy samples, reward).
//! - [`accumulator`]: additive evidence channels, softmax preference and the
//!   threshold-gated decision rule.
//! - [`autodiff`]: a small reverse-mode tape, parameter store and Adam.
//! - [`a2c`]: one-step advantage actor-critic losses and episode updates.
//! - [`agents`]: the recurrent forced-choice baseline, the threshold-learning
//!   accumulator agent and the jointly trained evidence + threshold agent.
//! - [`mc_oracle`]: Monte-Carlo sweeps of fixed-threshold accumulators.
//! - [`harness`]: experiment configuration, evaluation, output files, tables
//!   and charts.

pub mod a2c;
pub mod accumulator;
pub mod agents;
pub mod autodiff;
pub mod env;
mod error;
pub mod harness;
pub mod mc_oracle;
pub mod rng;

pub use error::{Error, Result};
