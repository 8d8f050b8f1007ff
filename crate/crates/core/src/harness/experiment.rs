use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalRecord, ExperimentConfig};
use crate::accumulator::ThresholdGrid;
use crate::agents::{
    final_performance, train_with_progress, Agent, AgentKind, JointAgent, RnnAgent, ThresholdAgent,
};
use crate::mc_oracle;
use crate::rng::{substream, Stream};
use crate::{Error, Result};

/// One line of `curve.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub agent: AgentKind,
    pub epsilon: f64,
    pub seed: u64,
    pub episodes_trained: u64,
    pub accuracy: f64,
    pub mean_decision_time: f64,
    pub mean_reward: f64,
}

impl CurveRow {
    fn new(cfg: &ExperimentConfig, r: &EvalRecord) -> Self {
        Self {
            agent: cfg.agent,
            epsilon: cfg.epsilon,
            seed: cfg.seed,
            episodes_trained: r.episodes_trained,
            accuracy: r.accuracy,
            mean_decision_time: r.mean_decision_time,
            mean_reward: r.mean_reward,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    /// Mean of the last `final_window` evaluations, or the best threshold's
    /// statistics for a Monte-Carlo sweep.
    pub final_metrics: EvalRecord,
    pub evaluations: usize,
    pub best_tau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub curve: Vec<CurveRow>,
    pub dir: PathBuf,
}

/// Creates the learning agent named by `cfg` from its agent-init stream.
pub fn build_agent(cfg: &ExperimentConfig) -> Result<Box<dyn Agent>> {
    let mut rng = substream(cfg.seed, Stream::AgentInit);
    Ok(match cfg.agent {
        AgentKind::McOracle => {
            return Err(Error::InvalidConfig(
                "the Monte-Carlo oracle does not learn".into(),
            ))
        }
        AgentKind::A2cRnn => Box::new(RnnAgent::new(cfg.rnn_learner(), &mut rng)?),
        AgentKind::Threshold => Box::new(ThresholdAgent::new(
            cfg.threshold_learner(),
            ThresholdGrid::threshold_agent(),
            cfg.sensitivity,
            &mut rng,
        )?),
        AgentKind::Joint => Box::new(JointAgent::new(
            cfg.joint(),
            ThresholdGrid::joint_agent(),
            &mut rng,
        )?),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with_progress(cfg, &mut |_| {})
}

/// Trains (or sweeps) and writes `curve.csv`, `summary.json` and, when
/// requested, `checkpoint.bin` into `cfg.output_dir`. Sweeps also write
/// `sweep.csv`.
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    progress: &mut dyn FnMut(&EvalRecord),
) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_context(&dir, e))?;
    let env = cfg.env();

    let (records, final_metrics, best_tau) = if cfg.agent == AgentKind::McOracle {
        let res = mc_oracle::sweep(
            &env,
            &ThresholdGrid::monte_carlo(),
            cfg.mc_rollouts,
            cfg.seed,
        )?;
        let best = res.best();
        let record = EvalRecord {
            episodes_trained: 0,
            accuracy: best.mean_accuracy,
            mean_decision_time: best.mean_decision_time,
            mean_reward: best.mean_reward,
        };
        progress(&record);
        let path = dir.join("sweep.csv");
        res.write_csv(BufWriter::new(create(&path)?))?;
        (vec![record], record, Some(res.best_tau))
    } else {
        let mut agent = build_agent(cfg)?;
        let curve = train_with_progress(agent.as_mut(), &env, &cfg.train(), cfg.seed, progress)?;
        let fin =
            final_performance(&curve, cfg.final_window).ok_or(Error::Empty("learning curve"))?;
        if cfg.checkpoint {
            agent.params().save(&dir.join("checkpoint.bin"))?;
        }
        (curve.records, fin, None)
    };

    let curve: Vec<CurveRow> = records.iter().map(|r| CurveRow::new(cfg, r)).collect();
    write_curve(&dir.join("curve.csv"), &curve)?;
    let summary = Summary {
        config: cfg.clone(),
        final_metrics,
        evaluations: records.len(),
        best_tau,
    };
    let path = dir.join("summary.json");
    let mut w = BufWriter::new(create(&path)?);
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(RunOutput {
        summary,
        curve,
        dir,
    })
}

fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| io_context(path, e))
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}
