//! Post-run summaries: windowed level complexity, solved rate over time,
//! plot-ready CSV and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::run::{EvalRecord, UpdateRecord};

/// Phases whose levels the student trained on.
pub const TRAINED_PHASES: [&str; 2] = ["replay", "dr"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityPoint {
    pub window_start: u64,
    pub window_end: u64,
    pub levels: usize,
    /// Mean over solvable levels only.
    pub mean_shortest_path: Option<f64>,
    pub mean_num_blocks: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvedRatePoint {
    pub t: u64,
    pub mean_solved_rate: f64,
    pub median_solved_rate: f64,
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("malformed {}", path.display()))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Means of trained-on level complexity over consecutive windows of
/// `window` updates.
pub fn complexity_series(rows: &[UpdateRecord], window: u64) -> Vec<ComplexityPoint> {
    let window = window.max(1);
    let mut groups: BTreeMap<u64, Vec<&UpdateRecord>> = BTreeMap::new();
    for r in rows.iter().filter(|r| TRAINED_PHASES.contains(&r.phase.as_str())) {
        groups.entry(r.t / window).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| ComplexityPoint {
            window_start: k * window,
            window_end: (k + 1) * window,
            levels: rs.len(),
            mean_shortest_path: mean(rs.iter().filter_map(|r| r.shortest_path_len.map(|x| x as f64))),
            mean_num_blocks: mean(rs.iter().map(|r| r.num_blocks as f64)),
        })
        .collect()
}

/// Mean shortest path of solvable trained-on levels in each third of
/// `0..total_updates`.
pub fn thirds(rows: &[UpdateRecord], total_updates: u64) -> [Option<f64>; 3] {
    let mut out = [None; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = total_updates * i as u64 / 3;
        let hi = total_updates * (i as u64 + 1) / 3;
        *slot = mean(
            rows.iter()
                .filter(|r| TRAINED_PHASES.contains(&r.phase.as_str()) && (lo..hi).contains(&r.t))
                .filter_map(|r| r.shortest_path_len.map(|x| x as f64)),
        );
    }
    out
}

pub fn solved_rate_series(rows: &[EvalRecord]) -> Vec<SolvedRatePoint> {
    let mut by_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_t.entry(r.t).or_default().push(r.solved_rate);
    }
    by_t.into_iter()
        .map(|(t, mut v)| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let median = if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            };
            SolvedRatePoint {
                t,
                mean_solved_rate: m,
                median_solved_rate: median,
            }
        })
        .collect()
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A minimal multi-series line chart.
pub fn svg_line_chart(title: &str, x_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 360.0, 50.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        w / 2.0,
        h - 12.0,
        escape(x_label)
    );
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{v:.3}</text>"#,
            pad - 4.0
        );
    }
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="10">{v}</text>"#,
            h - pad + 14.0
        );
    }
    for (i, (name, p)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 14.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReportOutcome {
    /// The run has not logged anything yet.
    Empty,
    Written(Vec<PathBuf>),
}

/// Writes `report/` inside a run directory. `window` defaults to a tenth
/// of the logged updates.
pub fn emit_report(run_dir: &Path, window: Option<u64>) -> anyhow::Result<ReportOutcome> {
    let updates_path = run_dir.join("updates.csv");
    let eval_path = run_dir.join("eval.csv");
    let updates: Vec<UpdateRecord> = if updates_path.exists() {
        read_csv(&updates_path)?
    } else {
        Vec::new()
    };
    let evals: Vec<EvalRecord> = if eval_path.exists() {
        read_csv(&eval_path)?
    } else {
        Vec::new()
    };
    if updates.is_empty() && evals.is_empty() {
        return Ok(ReportOutcome::Empty);
    }
    let last_t = updates.iter().map(|r| r.t + 1).max().unwrap_or(0);
    let window = window.unwrap_or_else(|| (last_t / 10).max(1));
    let dir = run_dir.join("report");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();

    let complexity = complexity_series(&updates, window);
    let path = dir.join("complexity.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for p in &complexity {
        w.serialize(p)?;
    }
    w.flush()?;
    written.push(path);

    let solved = solved_rate_series(&evals);
    let path = dir.join("solved_rate.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for p in &solved {
        w.serialize(p)?;
    }
    w.flush()?;
    written.push(path);

    let mid = |p: &ComplexityPoint| (p.window_start + p.window_end) as f64 / 2.0;
    let charts = [
        (
            "complexity.svg",
            svg_line_chart(
                "Trained-on level complexity",
                "update",
                &[
                    (
                        "shortest path",
                        complexity
                            .iter()
                            .filter_map(|p| p.mean_shortest_path.map(|y| (mid(p), y)))
                            .collect(),
                    ),
                    (
                        "blocks",
                        complexity
                            .iter()
                            .filter_map(|p| p.mean_num_blocks.map(|y| (mid(p), y)))
                            .collect(),
                    ),
                ],
            ),
        ),
        (
            "solved_rate.svg",
            svg_line_chart(
                "Held-out solved rate",
                "update",
                &[
                    (
                        "mean",
                        solved.iter().map(|p| (p.t as f64, p.mean_solved_rate)).collect(),
                    ),
                    (
                        "median",
                        solved.iter().map(|p| (p.t as f64, p.median_solved_rate)).collect(),
                    ),
                ],
            ),
        ),
    ];
    for (name, svg) in charts {
        let path = dir.join(name);
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(ReportOutcome::Written(written))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, phase: &str, sp: Option<usize>, blocks: usize) -> UpdateRecord {
        UpdateRecord {
            t,
            phase: phase.into(),
            task_id: None,
            pvl: 0.0,
            atpl: 0.0,
            combined: 0.0,
            colearnability: None,
            priority_prob: None,
            shortest_path_len: sp,
            num_blocks: blocks,
            mean_return: 0.0,
        }
    }

    #[test]
    fn windowed_means_by_hand() {
        let rows = vec![
            row(0, "replay", Some(4), 10),
            row(1, "replay", Some(6), 20),
            row(1, "exploration", Some(100), 100),
            row(2, "replay", None, 30),
            row(3, "replay", Some(9), 12),
        ];
        let s = complexity_series(&rows, 2);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].window_start, s[0].window_end, s[0].levels), (0, 2, 2));
        assert_eq!(s[0].mean_shortest_path, Some(5.0));
        assert_eq!(s[0].mean_num_blocks, Some(15.0));
        assert_eq!(s[1].mean_shortest_path, Some(9.0));
        assert_eq!(s[1].mean_num_blocks, Some(21.0));
    }

    #[test]
    fn constant_complexity_is_flat() {
        let rows: Vec<_> = (0..30).map(|t| row(t, "dr", Some(7), 3)).collect();
        let s = complexity_series(&rows, 5);
        assert!(s
            .iter()
            .all(|p| p.mean_shortest_path == Some(7.0) && p.mean_num_blocks == Some(3.0)));
        assert_eq!(thirds(&rows, 30), [Some(7.0); 3]);
    }

    #[test]
    fn solved_rate_aggregates() {
        let e = |t, r| EvalRecord {
            t,
            level: String::new(),
            solved_rate: r,
            mean_return: 0.0,
            episodes: 1,
        };
        let s = solved_rate_series(&[e(10, 0.2), e(10, 0.6), e(10, 1.0), e(20, 0.5)]);
        assert_eq!(s.len(), 2);
        assert!((s[0].mean_solved_rate - 0.6).abs() < 1e-15);
        assert_eq!(s[0].median_solved_rate, 0.6);
    }

    #[test]
    fn empty_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_report(dir.path(), None).unwrap(), ReportOutcome::Empty);
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = svg_line_chart(
            "a < b & c",
            "x",
            &[("s", vec![(0.0, 1.0), (1.0, 2.0)]), ("empty", vec![])],
        );
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let empty = svg_line_chart("none", "x", &[]);
        roxmltree::Document::parse(&empty).unwrap();
    }
}
