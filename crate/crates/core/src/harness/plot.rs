use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::CurveRow;
use crate::agents::AgentKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    DecisionTime,
    Reward,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::DecisionTime, Metric::Reward];

    fn slug(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::DecisionTime => "decision_time",
            Metric::Reward => "reward",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::DecisionTime => "Decision time",
            Metric::Reward => "Reward",
        }
    }

    fn of(self, r: &CurveRow) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::DecisionTime => r.mean_decision_time,
            Metric::Reward => r.mean_reward,
        }
    }
}

/// Parses a `curve.csv`. Errors name the file and the offending line; a file
/// without data rows is an error.
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let parse_err = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<CurveRow>().enumerate() {
        // Line 1 is the header.
        let row = rec.map_err(|e| parse_err(format!("row {}: {e}", i + 2)))?;
        for v in [
            row.epsilon,
            row.accuracy,
            row.mean_decision_time,
            row.mean_reward,
        ] {
            if !v.is_finite() {
                return Err(parse_err(format!("row {}: non-finite value", i + 2)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok(rows)
}

/// Writes three SVG charts (accuracy, decision time, reward against training
/// episodes) per epsilon found in `curves`. Learning agents are averaged over
/// seeds; the Monte-Carlo estimate is drawn as a dashed horizontal line.
///
/// All inputs are parsed before anything is written.
pub fn emit_curves(curves: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if curves.is_empty() {
        return Err(Error::Empty("curve file list"));
    }
    let mut rows = Vec::new();
    for p in curves {
        let path = if p.is_dir() {
            p.join("curve.csv")
        } else {
            p.clone()
        };
        rows.extend(read_curve_csv(&path)?);
    }

    let mut by_eps: BTreeMap<i64, Vec<CurveRow>> = BTreeMap::new();
    for r in rows {
        by_eps
            .entry((r.epsilon * 1e6).round() as i64)
            .or_default()
            .push(r);
    }

    let mut charts = Vec::new();
    for rows in by_eps.values() {
        let eps = rows[0].epsilon;
        for metric in Metric::ALL {
            let name = format!("eps{eps}_{}.svg", metric.slug());
            charts.push((name, render(rows, metric, eps)));
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = out_dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

fn color(a: AgentKind) -> &'static str {
    match a {
        AgentKind::McOracle => "#000000",
        AgentKind::A2cRnn => "#d62728",
        AgentKind::Threshold => "#1f77b4",
        AgentKind::Joint => "#2ca02c",
    }
}

fn render(rows: &[CurveRow], metric: Metric, eps: f64) -> String {
    // Per agent: episodes -> (sum, count) over seeds.
    let mut series: BTreeMap<AgentKind, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let e = series
            .entry(r.agent)
            .or_default()
            .entry(r.episodes_trained)
            .or_insert((0.0, 0));
        e.0 += metric.of(r);
        e.1 += 1;
    }
    let series: Vec<(AgentKind, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(a, pts)| {
            let pts = pts
                .into_iter()
                .map(|(x, (s, n))| (x as f64, s / n as f64))
                .collect();
            (a, pts)
        })
        .collect();

    let learners = series.iter().filter(|(a, _)| *a != AgentKind::McOracle);
    let x_max = learners
        .clone()
        .flat_map(|(_, p)| p.iter().map(|q| q.0))
        .fold(0.0, f64::max)
        .max(1.0);
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (mut y_lo, mut y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
        (lo.min(y), hi.max(y))
    });
    if metric == Metric::Accuracy {
        (y_lo, y_hi) = (0.0, 1.0);
    } else {
        let pad = ((y_hi - y_lo) * 0.05).max(0.5);
        (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    }

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{} (eps={eps})</text>"#,
        LEFT + pw / 2.0,
        metric.title()
    )
    .unwrap();

    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let y = y_lo + f * (y_hi - y_lo);
        let py = sy(y);
        writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.2}</text>"##,
            LEFT + pw,
            LEFT - 5.0,
            py + 4.0
        )
        .unwrap();
        let x = f * x_max;
        let px = sx(x);
        writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{x:.0}</text>"#,
            TOP + ph + 15.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">training episodes</text>"#,
        LEFT + pw / 2.0,
        H - 8.0
    )
    .unwrap();

    for (i, (agent, pts)) in series.iter().enumerate() {
        let c = color(*agent);
        if *agent == AgentKind::McOracle {
            let y = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
            writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{c}" stroke-dasharray="6,4"/>"#,
                sy(y),
                LEFT + pw
            )
            .unwrap();
        } else {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 10.0;
        writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            agent.label()
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const HEADER: &str =
        "agent,epsilon,seed,episodes_trained,accuracy,mean_decision_time,mean_reward\n";

    #[test]
    fn one_agent_one_epsilon_gives_three_charts() {
        let dir = tempfile::tempdir().unwrap();
        let csv =
            format!("{HEADER}threshold,0.4,1,500,0.8,3.5,20.1\nthreshold,0.4,1,1000,0.9,4,22\n");
        let p = write(dir.path(), "c.csv", &csv);
        let out = dir.path().join("plots");
        let files = emit_curves(&[p], &out).unwrap();
        assert_eq!(files.len(), 3);
        for f in files {
            let text = std::fs::read_to_string(f).unwrap();
            assert!(text.starts_with("<svg") && text.contains("polyline"));
        }
    }

    #[test]
    fn empty_file_errors_without_output() {
        let dir = tempfile::tempdir().unwrap();
        let good = write(
            dir.path(),
            "a.csv",
            &format!("{HEADER}joint,0,1,500,1,2,29\n"),
        );
        let empty = write(dir.path(), "b.csv", HEADER);
        let out = dir.path().join("plots");
        assert!(emit_curves(&[good, empty], &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn malformed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.csv",
            &format!("{HEADER}joint,0,1,500,1,2,29\njoint,0,1,x,1,2,29\n"),
        );
        let err = read_curve_csv(&p).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }
}
