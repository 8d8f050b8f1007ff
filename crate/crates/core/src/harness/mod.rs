//! Experiment plumbing: evaluation protocol, configuration, per-run output
//! bundles, result tables and learning-curve charts.

mod config;
mod experiment;
mod plot;
mod table;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionSelection, Agent};
use crate::env::{EnvConfig, OutcomeKind};
use crate::{Error, Result};

pub use config::{default_joint_lr, ExperimentConfig};
pub use experiment::{
    build_agent, run_experiment, run_experiment_with_progress, CurveRow, RunOutput, Summary,
};
pub use plot::{emit_curves, read_curve_csv, Metric};
pub use table::{emit_table, read_summaries};

/// Performance of a frozen agent at one point of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episodes_trained: u64,
    pub accuracy: f64,
    pub mean_decision_time: f64,
    pub mean_reward: f64,
}

/// Plays `n_eval` episodes with learning off.
///
/// Timeouts count as incorrect and take `t_max` steps.
pub fn evaluate(
    agent: &mut dyn Agent,
    env: &EnvConfig,
    n_eval: usize,
    selection: ActionSelection,
    env_rng: &mut dyn RngCore,
    policy_rng: &mut dyn RngCore,
    episodes_trained: u64,
) -> Result<EvalRecord> {
    if n_eval < 1 {
        return Err(Error::InvalidArgument(
            "evaluation needs at least one episode".into(),
        ));
    }
    let (mut correct, mut time, mut reward) = (0usize, 0.0, 0.0);
    for _ in 0..n_eval {
        let res = agent.run_episode(env, env_rng, policy_rng, false, selection)?;
        correct += usize::from(res.correct());
        time += f64::from(if res.kind == OutcomeKind::Timeout {
            env.t_max
        } else {
            res.decision_time
        });
        reward += res.reward;
    }
    let n = n_eval as f64;
    Ok(EvalRecord {
        episodes_trained,
        accuracy: correct as f64 / n,
        mean_decision_time: time / n,
        mean_reward: reward / n,
    })
}
