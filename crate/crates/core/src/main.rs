use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use accumulator_rl::agents::AgentKind;
use accumulator_rl::harness::{
    emit_curves, emit_table, read_summaries, run_experiment_with_progress, ExperimentConfig,
};
use accumulator_rl::Result;

#[derive(Parser)]
#[command(
    name = "accumulator-rl",
    version,
    about = "Evidence-accumulator agents on the Mode Estimation task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write curve.csv and summary.json.
    Run(RunArgs),
    /// Monte-Carlo sweep of fixed thresholds at one noise level.
    Sweep(SweepArgs),
    /// Aggregate summary.json files (or run directories) into a reward table.
    Table {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw SVG learning curves from curve.csv files (or run directories).
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for this run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-evaluation progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// mc_oracle, a2c_rnn, threshold or joint.
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Evaluate once before training.
    #[arg(long)]
    initial_eval: bool,
    /// Save the trained parameters to checkpoint.bin.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Rollouts per threshold.
    #[arg(long)]
    rollouts: Option<usize>,
}

/// Prints a line to stdout, ignoring a closed pipe.
fn say(line: impl Display) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn base_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = c.epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn default_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}_eps{}_seed{}", cfg.agent, cfg.epsilon, cfg.seed))
}

fn execute(mut cfg: ExperimentConfig, c: &Common) -> Result<()> {
    match &c.out {
        Some(out) => cfg.output_dir = out.clone(),
        None if c.config.is_none() => cfg.output_dir = default_dir(&cfg),
        None => {}
    }
    let quiet = c.quiet;
    let out = run_experiment_with_progress(&cfg, &mut |r| {
        if !quiet {
            eprintln!(
                "episodes {:>6}  accuracy {:.3}  decision time {:6.2}  reward {:7.2}",
                r.episodes_trained, r.accuracy, r.mean_decision_time, r.mean_reward
            );
        }
    })?;
    let f = out.summary.final_metrics;
    match out.summary.best_tau {
        Some(tau) => say(format_args!(
            "{} eps={} best tau={tau}: reward {:.2}, accuracy {:.3}, decision time {:.2}",
            cfg.agent, cfg.epsilon, f.mean_reward, f.accuracy, f.mean_decision_time
        )),
        None => say(format_args!(
            "{} eps={} seed={}: final reward {:.2}, accuracy {:.3}, decision time {:.2}",
            cfg.agent, cfg.epsilon, cfg.seed, f.mean_reward, f.accuracy, f.mean_decision_time
        )),
    }
    say(format_args!("wrote {}", out.dir.display()));
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let mut cfg = base_config(&a.common)?;
            if let Some(k) = a.agent {
                cfg.agent = k;
            }
            if let Some(n) = a.episodes {
                cfg.episodes = n;
            }
            if let Some(n) = a.eval_interval {
                cfg.eval_interval = n;
            }
            if let Some(n) = a.eval_episodes {
                cfg.eval_episodes = n;
            }
            cfg.initial_eval |= a.initial_eval;
            cfg.checkpoint |= a.checkpoint;
            execute(cfg, &a.common)
        }
        Command::Sweep(a) => {
            let mut cfg = base_config(&a.common)?;
            cfg.agent = AgentKind::McOracle;
            if let Some(n) = a.rollouts {
                cfg.mc_rollouts = n;
            }
            execute(cfg, &a.common)
        }
        Command::Table { inputs, out } => {
            let table = emit_table(&read_summaries(&inputs)?);
            let _ = write!(std::io::stdout().lock(), "{table}");
            if let Some(path) = out {
                std::fs::write(path, &table)?;
            }
            Ok(())
        }
        Command::Plot { inputs, out } => {
            for path in emit_curves(&inputs, &out)? {
                say(path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
