use serde::{Deserialize, Serialize};

use super::{ActionSelection, Agent};
use crate::env::EnvConfig;
use crate::harness::{evaluate, EvalRecord};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Also evaluate before any training. A run with zero episodes always
    /// gets this initial evaluation.
    pub initial_eval: bool,
    pub eval_selection: ActionSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 50_000,
            eval_interval: 500,
            eval_episodes: 500,
            initial_eval: false,
            eval_selection: ActionSelection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub records: Vec<EvalRecord>,
}

/// Trains `agent` and evaluates it every `eval_interval` episodes.
pub fn train(
    agent: &mut dyn Agent,
    env: &EnvConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LearningCurve> {
    train_with_progress(agent, env, cfg, seed, &mut |_| {})
}

pub fn train_with_progress(
    agent: &mut dyn Agent,
    env: &EnvConfig,
    cfg: &TrainConfig,
    seed: u64,
    progress: &mut dyn FnMut(&EvalRecord),
) -> Result<LearningCurve> {
    if cfg.eval_interval == 0 {
        return Err(Error::InvalidConfig(
            "eval_interval must be positive".into(),
        ));
    }
    let mut env_rng = substream(seed, Stream::Env);
    let mut policy_rng = substream(seed, Stream::AgentSampling);
    let mut curve = LearningCurve::default();
    let mut eval_at =
        |agent: &mut dyn Agent, trained: u64, curve: &mut LearningCurve| -> Result<()> {
            let k = trained / cfg.eval_interval;
            let record = evaluate(
                agent,
                env,
                cfg.eval_episodes,
                cfg.eval_selection,
                &mut substream(seed, Stream::EvalEnv(k)),
                &mut substream(seed, Stream::EvalSampling(k)),
                trained,
            )?;
            progress(&record);
            curve.records.push(record);
            Ok(())
        };

    if cfg.initial_eval || cfg.episodes == 0 {
        eval_at(agent, 0, &mut curve)?;
    }
    for episode in 1..=cfg.episodes {
        agent.run_episode(
            env,
            &mut env_rng,
            &mut policy_rng,
            true,
            ActionSelection::Sample,
        )?;
        if episode % cfg.eval_interval == 0 {
            eval_at(agent, episode, &mut curve)?;
        }
    }
    Ok(curve)
}

/// Mean of the last `window` evaluations.
pub fn final_performance(curve: &LearningCurve, window: usize) -> Option<EvalRecord> {
    let n = curve.records.len().min(window);
    if n == 0 {
        return None;
    }
    let tail = &curve.records[curve.records.len() - n..];
    let mean = |f: fn(&EvalRecord) -> f64| tail.iter().map(f).sum::<f64>() / n as f64;
    Some(EvalRecord {
        episodes_trained: tail[n - 1].episodes_trained,
        accuracy: mean(|r| r.accuracy),
        mean_decision_time: mean(|r| r.mean_decision_time),
        mean_reward: mean(|r| r.mean_reward),
    })
}
