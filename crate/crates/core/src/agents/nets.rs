use rand::Rng;

use crate::autodiff::{Bound, Dense, ParameterStore, Tape, Var};
use crate::Result;

/// Observation → ReLU(25) → (softmax over threshold bins, value).
#[derive(Debug, Clone, Copy)]
pub struct ThresholdNet {
    pub hidden: Dense,
    pub policy: Dense,
    pub value: Dense,
}

impl ThresholdNet {
    pub const HIDDEN: usize = 25;

    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        prefix: &str,
        inputs: usize,
        bins: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            hidden: Dense::new(
                store,
                &format!("{prefix}.hidden"),
                inputs,
                Self::HIDDEN,
                rng,
            )?,
            policy: Dense::new(store, &format!("{prefix}.policy"), Self::HIDDEN, bins, rng)?,
            value: Dense::new(store, &format!("{prefix}.value"), Self::HIDDEN, 1, rng)?,
        })
    }

    /// Returns (bin probabilities, value estimate).
    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<(Var, Var)> {
        let pre = self.hidden.forward(tape, params, x)?;
        let h = tape.relu(pre)?;
        let logits = self.policy.forward(tape, params, h)?;
        let probs = tape.softmax(logits)?;
        let value = self.value.forward(tape, params, h)?;
        Ok((probs, value))
    }
}

/// Binary observation → ReLU(20) → per-channel Beta concentrations (each
/// `softplus + 1`, so at least 1) and a private value head.
#[derive(Debug, Clone, Copy)]
pub struct EvidenceNet {
    pub hidden: Dense,
    pub alpha: Dense,
    pub beta: Dense,
    pub value: Dense,
}

pub struct EvidenceOutput {
    pub alpha: Var,
    pub beta: Var,
    pub value: Var,
}

impl EvidenceNet {
    pub const HIDDEN: usize = 20;

    pub fn new<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        prefix: &str,
        inputs: usize,
        channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            hidden: Dense::new(
                store,
                &format!("{prefix}.hidden"),
                inputs,
                Self::HIDDEN,
                rng,
            )?,
            alpha: Dense::new(
                store,
                &format!("{prefix}.alpha"),
                Self::HIDDEN,
                channels,
                rng,
            )?,
            beta: Dense::new(
                store,
                &format!("{prefix}.beta"),
                Self::HIDDEN,
                channels,
                rng,
            )?,
            value: Dense::new(store, &format!("{prefix}.value"), Self::HIDDEN, 1, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<EvidenceOutput> {
        let pre = self.hidden.forward(tape, params, x)?;
        let h = tape.relu(pre)?;
        let concentration = |tape: &mut Tape, head: &Dense| -> Result<Var> {
            let raw = head.forward(tape, params, h)?;
            let pos = tape.softplus(raw)?;
            tape.offset(pos, 1.0)
        };
        let alpha = concentration(tape, &self.alpha)?;
        let beta = concentration(tape, &self.beta)?;
        let value = self.value.forward(tape, params, h)?;
        Ok(EvidenceOutput { alpha, beta, value })
    }
}
