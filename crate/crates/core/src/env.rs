//! The Mode Estimation task.
//!
//! At the start of an episode the environment picks a hidden mode uniformly
//! at random. Every step it emits one sample, equal to the mode with
//! probability `1 - epsilon` and to each of the other symbols with
//! probability `epsilon / (n_symbols - 1)`. The agent either guesses the mode
//! (ending the episode) or waits for another sample. A correct guess after
//! `t` samples pays `r_correct - (t - 1)`; a wrong guess pays `r_incorrect`;
//! not guessing by the end of step `t_max` pays `r_timeout`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub epsilon: f64,
    pub n_symbols: usize,
    pub t_max: u32,
    pub r_correct: f64,
    pub r_incorrect: f64,
    pub r_timeout: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            n_symbols: 10,
            t_max: 30,
            r_correct: 30.0,
            r_incorrect: -30.0,
            r_timeout: -30.0,
        }
    }
}

impl EnvConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.n_symbols < 2 {
            return Err(Error::InvalidConfig("n_symbols must be at least 2".into()));
        }
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeState {
    hidden_mode: usize,
    t: u32,
    terminated: bool,
}

impl EpisodeState {
    pub fn hidden_mode(&self) -> usize {
        self.hidden_mode
    }

    /// Current step, starting at 1 for the step on which the first sample is seen.
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Onehot10,
    Binary4,
}

impl Encoding {
    pub fn width(self) -> usize {
        match self {
            Encoding::Onehot10 => 10,
            Encoding::Binary4 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub encoding: Encoding,
    pub payload: Vec<f64>,
}

impl Observation {
    /// Recovers the symbol index from the payload.
    pub fn decode(&self) -> usize {
        match self.encoding {
            Encoding::Onehot10 => self
                .payload
                .iter()
                .position(|&v| v == 1.0)
                .unwrap_or_default(),
            Encoding::Binary4 => self
                .payload
                .iter()
                .fold(0, |acc, &bit| (acc << 1) | usize::from(bit == 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    NoGuess,
    CorrectGuess,
    IncorrectGuess,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Sample for the next step, present only when the episode continues.
    pub sample: Option<usize>,
    pub reward: f64,
    pub terminated: bool,
    pub kind: OutcomeKind,
    /// Step at which this outcome happened.
    pub t: u32,
}

impl StepOutcome {
    pub fn observation(&self, encoding: Encoding) -> Option<Observation> {
        self.sample
            .map(|s| encode_observation(s, encoding).expect("environment samples are in range"))
    }
}

/// Starts a new episode with a uniformly drawn hidden mode.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> EpisodeState {
    EpisodeState {
        hidden_mode: rng.random_range(0..config.n_symbols),
        t: 1,
        terminated: false,
    }
}

/// Draws one sample from the episode's distribution.
pub fn draw_sample<R: Rng + ?Sized>(
    state: &EpisodeState,
    config: &EnvConfig,
    rng: &mut R,
) -> Result<usize> {
    if state.terminated {
        return Err(Error::EpisodeTerminated);
    }
    let u: f64 = rng.random();
    if u >= config.epsilon {
        return Ok(state.hidden_mode);
    }
    let other = rng.random_range(0..config.n_symbols - 1);
    Ok(if other >= state.hidden_mode {
        other + 1
    } else {
        other
    })
}

/// Encodes a symbol in `0..10` as a one-hot or a 4-bit big-endian vector.
pub fn encode_observation(symbol: usize, encoding: Encoding) -> Result<Observation> {
    if symbol >= 10 {
        return Err(Error::IndexOutOfRange {
            index: symbol,
            len: 10,
        });
    }
    let payload = match encoding {
        Encoding::Onehot10 => {
            let mut v = vec![0.0; 10];
            v[symbol] = 1.0;
            v
        }
        Encoding::Binary4 => (0..4)
            .rev()
            .map(|bit| ((symbol >> bit) & 1) as f64)
            .collect(),
    };
    Ok(Observation { encoding, payload })
}

/// Applies the agent's decision for the current step.
///
/// The agent must already have seen the sample for step `state.t()`. When the
/// episode continues the returned outcome carries the next sample.
pub fn step<R: Rng + ?Sized>(
    state: &mut EpisodeState,
    config: &EnvConfig,
    agent_guess: Option<usize>,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.terminated {
        return Err(Error::EpisodeTerminated);
    }
    let t = state.t;
    let (reward, kind) = match agent_guess {
        Some(g) if g >= config.n_symbols => {
            return Err(Error::IndexOutOfRange {
                index: g,
                len: config.n_symbols,
            })
        }
        Some(g) if g == state.hidden_mode => (
            config.r_correct - f64::from(t - 1),
            OutcomeKind::CorrectGuess,
        ),
        Some(_) => (config.r_incorrect, OutcomeKind::IncorrectGuess),
        None if t >= config.t_max => (config.r_timeout, OutcomeKind::Timeout),
        None => (0.0, OutcomeKind::NoGuess),
    };

    if kind == OutcomeKind::NoGuess {
        state.t += 1;
        let sample = draw_sample(state, config, rng)?;
        return Ok(StepOutcome {
            sample: Some(sample),
            reward,
            terminated: false,
            kind,
            t,
        });
    }
    state.terminated = true;
    Ok(StepOutcome {
        sample: None,
        reward,
        terminated: true,
        kind,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn state_with_mode(mode: usize) -> EpisodeState {
        EpisodeState {
            hidden_mode: mode,
            t: 1,
            terminated: false,
        }
    }

    #[test]
    fn reset_is_uniform_over_modes() {
        let cfg = EnvConfig::default();
        let mut rng = substream(1, Stream::Env);
        let mut counts = [0usize; 10];
        let n = 100_000;
        for _ in 0..n {
            let s = reset(&cfg, &mut rng);
            assert_eq!(s.t(), 1);
            assert!(!s.terminated());
            counts[s.hidden_mode()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.1).abs() < 0.01, "frequency {f}");
        }
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let cfg = EnvConfig::default();
        let a = reset(&cfg, &mut substream(42, Stream::Env));
        let b = reset(&cfg, &mut substream(42, Stream::Env));
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_samples_are_the_mode() {
        let cfg = EnvConfig::with_epsilon(0.0);
        let st = state_with_mode(3);
        let mut rng = substream(2, Stream::Env);
        for _ in 0..1000 {
            assert_eq!(draw_sample(&st, &cfg, &mut rng).unwrap(), 3);
        }
    }

    fn empirical(eps: f64, mode: usize, n: usize) -> [f64; 10] {
        let cfg = EnvConfig::with_epsilon(eps);
        let st = state_with_mode(mode);
        let mut rng = substream(3, Stream::Env);
        let mut counts = [0.0; 10];
        for _ in 0..n {
            counts[draw_sample(&st, &cfg, &mut rng).unwrap()] += 1.0;
        }
        counts.map(|c| c / n as f64)
    }

    #[test]
    fn sample_distribution_matches_noise_model() {
        let p = empirical(0.4, 3, 100_000);
        assert!((p[3] - 0.6).abs() < 0.01, "{}", p[3]);
        assert!((p[7] - 0.4 / 9.0).abs() < 0.005, "{}", p[7]);
        let p = empirical(0.8, 5, 100_000);
        assert!((p[5] - 0.2).abs() < 0.01);
    }

    #[test]
    fn draw_after_termination_fails() {
        let cfg = EnvConfig::default();
        let mut st = state_with_mode(0);
        let mut rng = substream(4, Stream::Env);
        step(&mut st, &cfg, Some(0), &mut rng).unwrap();
        assert!(matches!(
            draw_sample(&st, &cfg, &mut rng),
            Err(Error::EpisodeTerminated)
        ));
        assert!(matches!(
            step(&mut st, &cfg, None, &mut rng),
            Err(Error::EpisodeTerminated)
        ));
    }

    #[test]
    fn binary_and_onehot_encodings() {
        assert_eq!(
            encode_observation(6, Encoding::Binary4).unwrap().payload,
            vec![0.0, 1.0, 1.0, 0.0]
        );
        assert_eq!(
            encode_observation(0, Encoding::Binary4).unwrap().payload,
            vec![0.0; 4]
        );
        let oh = encode_observation(3, Encoding::Onehot10).unwrap();
        assert_eq!(oh.payload.iter().sum::<f64>(), 1.0);
        assert_eq!(oh.payload[3], 1.0);
        for s in 0..10 {
            for enc in [Encoding::Binary4, Encoding::Onehot10] {
                assert_eq!(encode_observation(s, enc).unwrap().decode(), s);
            }
        }
        assert!(encode_observation(10, Encoding::Binary4).is_err());
    }

    #[test]
    fn timeout_after_t_max_samples() {
        let cfg = EnvConfig::default();
        let mut rng = substream(5, Stream::Env);
        let mut st = reset(&cfg, &mut rng);
        let mut last = None;
        for t in 1..=30 {
            assert_eq!(st.t(), t);
            let out = step(&mut st, &cfg, None, &mut rng).unwrap();
            last = Some(out);
            if t < 30 {
                assert_eq!(out.reward, 0.0);
                assert!(!out.terminated);
                assert!(out.sample.is_some());
            }
        }
        let out = last.unwrap();
        assert!(out.terminated);
        assert_eq!(out.kind, OutcomeKind::Timeout);
        assert_eq!(out.reward, -30.0);
    }
}
