use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::Summary;
use crate::agents::AgentKind;
use crate::{Error, Result};

/// Reads `summary.json` files; a directory argument means `<dir>/summary.json`.
pub fn read_summaries(paths: &[PathBuf]) -> Result<Vec<Summary>> {
    paths
        .iter()
        .map(|p| {
            let path = if p.is_dir() {
                p.join("summary.json")
            } else {
                p.clone()
            };
            read_summary(&path)
        })
        .collect()
}

fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Key for an epsilon column; exact decimal text so 0.2 and 0.2000 merge.
fn eps_key(eps: f64) -> i64 {
    (eps * 1e6).round() as i64
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// Final expected rewards, one row per agent and one column per epsilon,
/// averaged over seeds. A second table gives each cell minus the
/// Monte-Carlo cell at the same epsilon. Missing cells are blank.
pub fn emit_table(summaries: &[Summary]) -> String {
    // (agent, eps) -> per-seed rewards
    let mut cells: BTreeMap<(AgentKind, i64), Vec<(u64, f64)>> = BTreeMap::new();
    let mut eps_values: BTreeMap<i64, f64> = BTreeMap::new();
    for s in summaries {
        let k = eps_key(s.config.epsilon);
        eps_values.insert(k, s.config.epsilon);
        cells
            .entry((s.config.agent, k))
            .or_default()
            .push((s.config.seed, s.final_metrics.mean_reward));
    }
    let agents: Vec<AgentKind> = AgentKind::ALL
        .into_iter()
        .filter(|a| cells.keys().any(|(b, _)| b == a))
        .collect();
    let mean = |a: AgentKind, k: i64| {
        cells
            .get(&(a, k))
            .map(|v| v.iter().map(|(_, r)| r).sum::<f64>() / v.len() as f64)
    };

    let header = |out: &mut String, title: &str| {
        write!(out, "| {title} |").unwrap();
        for eps in eps_values.values() {
            write!(out, " eps={eps} |").unwrap();
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &eps_values {
            out.push_str("---|");
        }
        out.push('\n');
    };

    let mut out = String::new();
    header(&mut out, "Expected reward");
    for &a in &agents {
        write!(out, "| {} |", a.label()).unwrap();
        for &k in eps_values.keys() {
            write!(out, " {} |", fmt_cell(mean(a, k))).unwrap();
        }
        out.push('\n');
    }

    out.push('\n');
    header(&mut out, "Delta vs Monte-Carlo");
    for &a in &agents {
        write!(out, "| {} |", a.label()).unwrap();
        for &k in eps_values.keys() {
            let d = mean(a, k)
                .zip(mean(AgentKind::McOracle, k))
                .map(|(x, m)| x - m);
            write!(out, " {} |", fmt_cell(d)).unwrap();
        }
        out.push('\n');
    }

    if cells.values().any(|v| v.len() > 1) {
        out.push_str("\nPer seed:\n");
        for ((a, k), v) in &cells {
            let mut v = v.clone();
            v.sort_by_key(|(seed, _)| *seed);
            let list: Vec<String> = v.iter().map(|(s, r)| format!("seed {s}: {r:.2}")).collect();
            writeln!(
                out,
                "- {} eps={}: {}",
                a.label(),
                eps_values[k],
                list.join(", ")
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EvalRecord, ExperimentConfig};

    fn summary(agent: AgentKind, epsilon: f64, seed: u64, reward: f64) -> Summary {
        Summary {
            config: ExperimentConfig {
                agent,
                epsilon,
                seed,
                ..Default::default()
            },
            final_metrics: EvalRecord {
                episodes_trained: 0,
                accuracy: 0.0,
                mean_decision_time: 0.0,
                mean_reward: reward,
            },
            evaluations: 1,
            best_tau: None,
        }
    }

    #[test]
    fn single_cell_gives_one_by_one() {
        let t = emit_table(&[summary(AgentKind::Threshold, 0.4, 1, 24.9)]);
        let first: Vec<&str> = t.lines().take(3).collect();
        assert_eq!(first[0], "| Expected reward | eps=0.4 |");
        assert_eq!(first[2], "| Learning tau | 24.90 |");
        assert_eq!(
            t.lines()
                .filter(|l| l.starts_with("| Learning tau"))
                .count(),
            2
        );
        // No MC cell: delta blank.
        assert!(t.contains("| Learning tau |  |"));
    }

    #[test]
    fn mc_delta_against_itself_is_zero_and_missing_cells_blank() {
        let t = emit_table(&[
            summary(AgentKind::McOracle, 0.0, 1, 30.0),
            summary(AgentKind::McOracle, 0.4, 1, 25.0),
            summary(AgentKind::A2cRnn, 0.4, 1, 10.0),
            summary(AgentKind::A2cRnn, 0.4, 2, 20.0),
        ]);
        assert!(t.contains("| Monte-Carlo Estimate | 30.00 | 25.00 |"));
        assert!(t.contains("| A2C-RNN |  | 15.00 |"));
        assert!(t.contains("| Monte-Carlo Estimate | 0.00 | 0.00 |"));
        assert!(t.contains("| A2C-RNN |  | -10.00 |"));
        assert!(t.contains("seed 1: 10.00, seed 2: 20.00"));
    }
}
