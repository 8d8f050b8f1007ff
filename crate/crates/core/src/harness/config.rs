use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::a2c::A2CConfig;
use crate::agents::{ActionSelection, AgentKind, JointConfig, TrainConfig};
use crate::env::EnvConfig;
use crate::mc_oracle::DEFAULT_ROLLOUTS;
use crate::{Error, Result};

/// One experiment: which agent, which environment, how long, where to write.
///
/// Stored as a flat TOML document. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    pub epsilon: f64,
    pub seed: u64,
    pub episodes: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub initial_eval: bool,
    /// Action selection during evaluation.
    pub eval_selection: ActionSelection,
    /// Number of trailing evaluations averaged into the final metrics.
    pub final_window: usize,
    pub sensitivity: f64,
    pub gamma: f64,
    pub eta: f64,
    pub rnn_lr: f64,
    pub rnn_entropy: f64,
    pub threshold_lr: f64,
    pub threshold_entropy: f64,
    /// Unset means the noise-dependent default, see [`default_joint_lr`].
    pub joint_lr: Option<f64>,
    pub joint_evidence_entropy: f64,
    pub joint_threshold_entropy: f64,
    pub grad_clip: Option<f64>,
    pub mc_rollouts: usize,
    pub checkpoint: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Threshold,
            epsilon: 0.0,
            seed: 0,
            episodes: 50_000,
            eval_interval: 500,
            eval_episodes: 500,
            initial_eval: false,
            eval_selection: ActionSelection::default(),
            final_window: 5,
            sensitivity: 1.0,
            gamma: 0.95,
            eta: 1.0,
            rnn_lr: 1e-3,
            rnn_entropy: 5.0,
            threshold_lr: 1e-4,
            threshold_entropy: 0.5,
            joint_lr: None,
            joint_evidence_entropy: 1.0,
            joint_threshold_entropy: 2.0,
            grad_clip: None,
            mc_rollouts: DEFAULT_ROLLOUTS,
            checkpoint: false,
            output_dir: PathBuf::from("runs"),
        }
    }
}

/// 5e-4 for low noise (epsilon up to 0.2), 1e-3 above.
pub fn default_joint_lr(epsilon: f64) -> f64 {
    if epsilon <= 0.2 + 1e-9 {
        5e-4
    } else {
        1e-3
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig::with_epsilon(self.epsilon)
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            initial_eval: self.initial_eval,
            eval_selection: self.eval_selection,
        }
    }

    pub fn rnn_learner(&self) -> A2CConfig {
        A2CConfig {
            gamma: self.gamma,
            eta: self.eta,
            beta_entropy: self.rnn_entropy,
            lr: self.rnn_lr,
            grad_clip: self.grad_clip,
        }
    }

    pub fn threshold_learner(&self) -> A2CConfig {
        A2CConfig {
            gamma: self.gamma,
            eta: self.eta,
            beta_entropy: self.threshold_entropy,
            lr: self.threshold_lr,
            grad_clip: self.grad_clip,
        }
    }

    pub fn joint(&self) -> JointConfig {
        JointConfig {
            lr: self
                .joint_lr
                .unwrap_or_else(|| default_joint_lr(self.epsilon)),
            gamma: self.gamma,
            eta: self.eta,
            evidence_entropy: self.joint_evidence_entropy,
            threshold_entropy: self.joint_threshold_entropy,
            sensitivity: self.sensitivity,
            grad_clip: self.grad_clip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env().validate()?;
        if self.eval_interval == 0 {
            return Err(Error::InvalidConfig(
                "eval_interval must be positive".into(),
            ));
        }
        if self.agent != AgentKind::McOracle
            && self.episodes > 0
            && self.episodes < self.eval_interval
            && !self.initial_eval
        {
            return Err(Error::InvalidConfig(format!(
                "{} episodes with eval_interval {} would never evaluate",
                self.episodes, self.eval_interval
            )));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig(
                "eval_episodes must be positive".into(),
            ));
        }
        if self.final_window == 0 {
            return Err(Error::InvalidConfig("final_window must be positive".into()));
        }
        if self.mc_rollouts == 0 {
            return Err(Error::InvalidConfig("mc_rollouts must be positive".into()));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(Error::InvalidConfig("sensitivity must be positive".into()));
        }
        match self.agent {
            AgentKind::McOracle => Ok(()),
            AgentKind::A2cRnn => self.rnn_learner().validate(),
            AgentKind::Threshold => self.threshold_learner().validate(),
            AgentKind::Joint => {
                self.joint().evidence_learner().validate()?;
                self.joint().threshold_learner().validate()
            }
        }
    }
}
