//! Monte-Carlo estimate of the best fixed-threshold accumulator.
//!
//! One-hot observations are used directly as evidence (unit sensitivity) and
//! the threshold is held fixed for every rollout. The sweep picks the
//! threshold with the highest mean reward.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::accumulator::{AccumulatorState, ThresholdGrid};
use crate::env::{self, EnvConfig, OutcomeKind};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

pub const DEFAULT_ROLLOUTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub tau: f64,
    pub n: usize,
    pub mean_reward: f64,
    pub mean_accuracy: f64,
    pub mean_decision_time: f64,
    /// Sample standard deviation of the per-episode reward.
    pub reward_std: f64,
}

/// Runs `n` episodes with a fixed threshold. Timeouts count `t_max` toward
/// decision time and as incorrect for accuracy.
pub fn rollout_fixed_threshold<R: rand::Rng + ?Sized>(
    env_cfg: &EnvConfig,
    tau: f64,
    n: usize,
    rng: &mut R,
) -> Result<RolloutStats> {
    env_cfg.validate()?;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "threshold {tau} outside [0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    let mut acc = AccumulatorState::new(env_cfg.n_symbols, 1.0)?;
    let mut kappa = vec![0.0; env_cfg.n_symbols];
    let (mut sum_r, mut sum_r2, mut correct, mut sum_t) = (0.0, 0.0, 0usize, 0.0);

    for _ in 0..n {
        acc.reset();
        let mut state = env::reset(env_cfg, rng);
        let mut sample = env::draw_sample(&state, env_cfg, rng)?;
        let outcome = loop {
            kappa.iter_mut().for_each(|k| *k = 0.0);
            kappa[sample] = 1.0;
            acc.accumulate(&kappa)?;
            let guess = acc.preference().decide(tau);
            let out = env::step(&mut state, env_cfg, guess, rng)?;
            match out.sample {
                Some(s) => sample = s,
                None => break out,
            }
        };
        sum_r += outcome.reward;
        sum_r2 += outcome.reward * outcome.reward;
        sum_t += f64::from(outcome.t);
        correct += usize::from(outcome.kind == OutcomeKind::CorrectGuess);
    }

    let nf = n as f64;
    let mean = sum_r / nf;
    let var = if n > 1 {
        ((sum_r2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RolloutStats {
        tau,
        n,
        mean_reward: mean,
        mean_accuracy: correct as f64 / nf,
        mean_decision_time: sum_t / nf,
        reward_std: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilon: f64,
    pub records: Vec<RolloutStats>,
    pub best_tau: f64,
    pub best_mean_reward: f64,
}

impl SweepResult {
    pub fn best(&self) -> &RolloutStats {
        self.records
            .iter()
            .find(|r| r.tau == self.best_tau)
            .expect("best threshold is one of the records")
    }

    /// CSV with header `epsilon,tau,n,mean_reward,mean_accuracy,mean_decision_time`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "epsilon,tau,n,mean_reward,mean_accuracy,mean_decision_time"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.epsilon, r.tau, r.n, r.mean_reward, r.mean_accuracy, r.mean_decision_time
            )?;
        }
        Ok(())
    }
}

/// Evaluates every threshold of `grid` with `n` rollouts on its own random
/// stream and keeps the best (lowest threshold on ties).
pub fn sweep(
    env_cfg: &EnvConfig,
    grid: &ThresholdGrid,
    n: usize,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    let records = grid
        .values()
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = substream(seed, Stream::Rollout(i as u64));
            rollout_fixed_threshold(env_cfg, tau, n, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = records
        .iter()
        .fold(None::<&RolloutStats>, |best, r| match best {
            Some(b) if b.mean_reward >= r.mean_reward => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty");
    Ok(SweepResult {
        epsilon: env_cfg.epsilon,
        best_tau: best.tau,
        best_mean_reward: best.mean_reward,
        records,
    })
}
