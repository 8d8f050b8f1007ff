//! The three learning agents and their training loop.
//!
//! - [`RnnAgent`]: Elman-RNN actor-critic choosing among the ten modes and a
//!   No-Op at every step (forced action selection).
//! - [`ThresholdAgent`]: one-hot observations are accumulated directly as
//!   evidence; a small network picks the threshold each step.
//! - [`JointAgent`]: an evidence network maps binary observations to Beta
//!   distributions over per-channel evidence, and a threshold network picks
//!   the threshold; both learn from the same reward.

mod joint;
mod nets;
mod rnn;
mod threshold;
mod train;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::a2c::{Targets, UpdateStats};
use crate::autodiff::{ParameterStore, Tape, Var};
use crate::env::{EnvConfig, OutcomeKind};
use crate::{Error, Result};

pub use joint::{JointAgent, JointConfig};
pub use nets::{EvidenceNet, ThresholdNet};
pub use rnn::RnnAgent;
pub use threshold::ThresholdAgent;
pub use train::{final_performance, train, train_with_progress, LearningCurve, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    McOracle,
    A2cRnn,
    Threshold,
    Joint,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::McOracle,
        AgentKind::A2cRnn,
        AgentKind::Threshold,
        AgentKind::Joint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::McOracle => "mc_oracle",
            AgentKind::A2cRnn => "a2c_rnn",
            AgentKind::Threshold => "threshold",
            AgentKind::Joint => "joint",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgentKind::McOracle => "Monte-Carlo Estimate",
            AgentKind::A2cRnn => "A2C-RNN",
            AgentKind::Threshold => "Learning tau",
            AgentKind::Joint => "Joint Training of tau and f",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown agent kind {s:?}")))
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an agent picks its discrete and continuous actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    /// Draw from the policy distributions (always used while learning).
    #[default]
    Sample,
    /// Most probable discrete action (lowest index on ties) and the mean of
    /// each Beta distribution.
    Greedy,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// What happened in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub reward: f64,
    pub decision_time: u32,
    pub kind: OutcomeKind,
    pub hidden_mode: usize,
    pub guess: Option<usize>,
    /// Preference of the guessed channel and the threshold in force when it
    /// fired; accumulator agents only.
    pub fired: Option<(f64, f64)>,
    pub update: Option<UpdateStats>,
}

impl EpisodeResult {
    pub fn correct(&self) -> bool {
        self.kind == OutcomeKind::CorrectGuess
    }
}

/// Everything needed to rebuild an episode's loss without the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeRecord {
    pub samples: Vec<usize>,
    /// Sampled discrete action per step (mode/No-Op index or threshold bin).
    pub actions: Vec<usize>,
    /// Sampled evidence per step (joint agent only).
    pub evidence: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

/// A rebuilt episode loss.
pub struct Replay {
    pub tape: Tape,
    pub loss: Var,
    /// The detached quantities that were used.
    pub targets: Targets,
}

/// A learner that plays Mode Estimation episodes.
pub trait Agent {
    /// Plays one episode. When `learn` is set, applies one A2C update at the
    /// end; learning requires sampled actions.
    fn run_episode(
        &mut self,
        env: &EnvConfig,
        env_rng: &mut dyn RngCore,
        policy_rng: &mut dyn RngCore,
        learn: bool,
        selection: ActionSelection,
    ) -> Result<EpisodeResult>;

    /// The most recent episode, as played.
    fn last_record(&self) -> &EpisodeRecord;

    /// Rebuilds the summed A2C loss of `record` under the parameter values in
    /// `store`. With `targets`, baselines and bootstrap values are frozen to
    /// the given numbers instead of being read off the rebuilt graph.
    fn replay_loss(
        &self,
        store: &ParameterStore,
        record: &EpisodeRecord,
        targets: Option<&Targets>,
    ) -> Result<Replay>;

    fn params(&self) -> &ParameterStore;

    fn params_mut(&mut self) -> &mut ParameterStore;
}

pub(crate) fn check_episode_args(
    env: &EnvConfig,
    learn: bool,
    selection: ActionSelection,
) -> Result<()> {
    if learn && selection == ActionSelection::Greedy {
        return Err(Error::InvalidArgument(
            "learning needs sampled actions".into(),
        ));
    }
    require_ten_symbols(env)
}

pub(crate) fn require_ten_symbols(env: &EnvConfig) -> Result<()> {
    if env.n_symbols != 10 {
        return Err(Error::InvalidConfig(format!(
            "agents are built for 10 symbols, environment has {}",
            env.n_symbols
        )));
    }
    env.validate()
}
