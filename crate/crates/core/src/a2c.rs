//! One-step advantage actor-critic.
//!
//! Per step the loss is
//!
//! ```text
//! -(G - v_detached) * log π(a|s)  +  η (G - v)²  -  β H(π(·|s))
//! ```
//!
//! with `G = r + γ v(s')` and `v(s') = 0` at terminal steps. Minimising it
//! follows the policy gradient, regresses the critic onto `G` and pushes the
//! policy toward higher entropy.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamState, ParameterStore, Tape, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2CConfig {
    pub gamma: f64,
    pub eta: f64,
    pub beta_entropy: f64,
    pub lr: f64,
    /// Optional global gradient-norm clip; off unless set.
    pub grad_clip: Option<f64>,
}

impl Default for A2CConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            eta: 1.0,
            beta_entropy: 0.0,
            lr: 1e-3,
            grad_clip: None,
        }
    }
}

impl A2CConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        if self.eta < 0.0 || self.beta_entropy < 0.0 || self.lr <= 0.0 {
            return Err(Error::InvalidConfig(
                "eta and beta_entropy must be non-negative, lr positive".into(),
            ));
        }
        if self.grad_clip.is_some_and(|c| c <= 0.0) {
            return Err(Error::InvalidConfig("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded step. `logprob`, `value` and `entropy` live on the episode tape.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub logprob: Var,
    pub value: Var,
    pub entropy: Var,
    pub reward: f64,
    /// Detached estimate of the next state's value; ignored at terminal steps.
    pub next_value: f64,
    pub terminal: bool,
    /// Overrides the detached value used in the advantage. Set only when a
    /// loss is rebuilt with frozen targets (e.g. for finite-difference checks).
    pub baseline: Option<f64>,
}

impl Transition {
    pub fn new(logprob: Var, value: Var, entropy: Var, reward: f64, terminal: bool) -> Self {
        Self {
            logprob,
            value,
            entropy,
            reward,
            next_value: 0.0,
            terminal,
            baseline: None,
        }
    }
}

/// Writes each transition's bootstrap value from its successor's value estimate.
pub fn link_next_values(tape: &Tape, transitions: &mut [Transition]) {
    for i in 0..transitions.len() {
        transitions[i].next_value = if transitions[i].terminal {
            0.0
        } else {
            transitions
                .get(i + 1)
                .map_or(0.0, |next| tape.scalar_value(next.value))
        };
    }
}

/// Detached quantities of an episode's loss: per-step baselines and bootstraps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Targets {
    pub baselines: Vec<f64>,
    pub next_values: Vec<f64>,
}

impl Targets {
    pub fn collect(tape: &Tape, transitions: &[Transition]) -> Self {
        Self {
            baselines: transitions
                .iter()
                .map(|t| t.baseline.unwrap_or_else(|| tape.scalar_value(t.value)))
                .collect(),
            next_values: transitions.iter().map(|t| t.next_value).collect(),
        }
    }

    /// Freezes `transitions` to these targets, starting at step `offset`.
    pub fn apply(&self, transitions: &mut [Transition], offset: usize) -> Result<()> {
        if offset + transitions.len() > self.baselines.len() {
            return Err(Error::ShapeMismatch(
                "frozen targets shorter than the episode".into(),
            ));
        }
        for (k, tr) in transitions.iter_mut().enumerate() {
            tr.baseline = Some(self.baselines[offset + k]);
            tr.next_value = self.next_values[offset + k];
        }
        Ok(())
    }

    pub fn extend(&mut self, other: Targets) {
        self.baselines.extend(other.baselines);
        self.next_values.extend(other.next_values);
    }
}

/// `G = r + γ v(s')`, with the bootstrap dropped at terminal steps.
pub fn one_step_return(tr: &Transition, gamma: f64) -> f64 {
    if tr.terminal {
        tr.reward
    } else {
        tr.reward + gamma * tr.next_value
    }
}

/// Records the per-step loss on `tape` and returns it with the advantage used.
pub fn a2c_loss(tape: &mut Tape, tr: &Transition, ret: f64, cfg: &A2CConfig) -> Result<(Var, f64)> {
    let baseline = tr.baseline.unwrap_or_else(|| tape.scalar_value(tr.value));
    let advantage = ret - baseline;
    let policy = tape.scale(tr.logprob, -advantage)?;
    let neg_value = tape.scale(tr.value, -1.0)?;
    let td = tape.offset(neg_value, ret)?;
    let sq = tape.mul(td, td)?;
    let value = tape.scale(sq, cfg.eta)?;
    let entropy = tape.scale(tr.entropy, -cfg.beta_entropy)?;
    let partial = tape.add(policy, value)?;
    Ok((tape.add(partial, entropy)?, advantage))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub mean_loss: f64,
    pub mean_advantage: f64,
}

/// Sums the per-step losses of one episode into a single scalar on `tape`.
pub fn episode_loss(
    tape: &mut Tape,
    transitions: &[Transition],
    cfg: &A2CConfig,
) -> Result<(Var, UpdateStats)> {
    if transitions.is_empty() {
        return Err(Error::Empty("transition list"));
    }
    let mut total: Option<Var> = None;
    let mut adv_sum = 0.0;
    for tr in transitions {
        let ret = one_step_return(tr, cfg.gamma);
        let (loss, adv) = a2c_loss(tape, tr, ret, cfg)?;
        adv_sum += adv;
        total = Some(match total {
            Some(t) => tape.add(t, loss)?,
            None => loss,
        });
    }
    let total = total.expect("non-empty");
    let n = transitions.len() as f64;
    Ok((
        total,
        UpdateStats {
            mean_loss: tape.scalar_value(total) / n,
            mean_advantage: adv_sum / n,
        },
    ))
}

/// Backpropagates `loss` into `store`, optionally clips, and takes one Adam step.
pub fn apply_update(
    tape: &Tape,
    loss: Var,
    store: &mut ParameterStore,
    adam: &mut AdamState,
    lr: f64,
    grad_clip: Option<f64>,
) -> Result<()> {
    tape.backward(loss, store)?;
    if let Some(c) = grad_clip {
        store.clip_grad_norm(c);
    }
    adam.step(store, lr);
    Ok(())
}

/// One combined gradient step for a whole episode.
pub fn update_episode(
    tape: &mut Tape,
    transitions: &[Transition],
    store: &mut ParameterStore,
    adam: &mut AdamState,
    cfg: &A2CConfig,
) -> Result<UpdateStats> {
    let (loss, stats) = episode_loss(tape, transitions, cfg)?;
    apply_update(tape, loss, store, adam, cfg.lr, cfg.grad_clip)?;
    Ok(stats)
}
