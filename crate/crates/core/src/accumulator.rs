//! Additive evidence accumulation with a threshold-gated decision rule.
//!
//! Each action owns a channel `nu[i]` that sums scaled evidence since the
//! start of the episode. The preference over actions is the softmax of the
//! channels, and an action fires only once its preference exceeds the
//! threshold. With no channel above threshold the module does nothing.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorState {
    nu: Vec<f64>,
    sensitivity: f64,
}

impl AccumulatorState {
    /// Creates zeroed channels. `sensitivity` scales every unit of evidence.
    pub fn new(n_channels: usize, sensitivity: f64) -> Result<Self> {
        if n_channels < 2 {
            return Err(Error::InvalidArgument(
                "an accumulator needs at least two channels".into(),
            ));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            nu: vec![0.0; n_channels],
            sensitivity,
        })
    }

    pub fn reset(&mut self) {
        self.nu.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn n_channels(&self) -> usize {
        self.nu.len()
    }

    /// Adds `sensitivity * kappa[i]` to every channel. Evidence must lie in `[0, 1]`.
    pub fn accumulate(&mut self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.nu.len() {
            return Err(Error::ShapeMismatch(format!(
                "evidence has {} components, accumulator has {} channels",
                kappa.len(),
                self.nu.len()
            )));
        }
        if let Some(bad) = kappa.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            return Err(Error::InvalidArgument(format!(
                "evidence component {bad} outside [0, 1]"
            )));
        }
        for (n, k) in self.nu.iter_mut().zip(kappa) {
            *n += self.sensitivity * k;
        }
        Ok(())
    }

    pub fn preference(&self) -> Preference {
        preference(&self.nu)
    }
}

/// Softmax preference over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Preference {
    rho: Vec<f64>,
}

impl Preference {
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Index of the largest preference strictly above `tau`, lowest index on ties.
    pub fn decide(&self, tau: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in self.rho.iter().enumerate() {
            if r > tau && best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Max-subtracted softmax of the channel values.
pub fn preference(nu: &[f64]) -> Preference {
    let max = nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rho: Vec<f64> = nu.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= z);
    Preference { rho }
}

/// Ordered set of candidate thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("threshold grid"));
        }
        if values.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "thresholds must lie in [0, 1)".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    fn tenths(lo: u32, hi: u32) -> Self {
        Self {
            values: (lo..=hi).map(|k| f64::from(k) / 10.0).collect(),
        }
    }

    /// {0, 0.1, ..., 0.9}, used by the Monte-Carlo sweep.
    pub fn monte_carlo() -> Self {
        Self::tenths(0, 9)
    }

    /// {0.1, ..., 0.9}, the action space of the threshold-learning agent.
    pub fn threshold_agent() -> Self {
        Self::tenths(1, 9)
    }

    /// {0.5, ..., 0.9}; at most one channel can exceed any of these.
    pub fn joint_agent() -> Self {
        Self::tenths(5, 9)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied()
    }
}
