//! Comparison tables, their CSV form, and convergence diagnostics.

use kexplore::explorers::RunTrace;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::metrics::MetricsReport;

pub const CSV_HEADER: [&str; 7] = ["policy", "env", "n_trials", "budget", "failure_rate", "worst_mean", "avg_mean"];

/// Marks a mean over zero successful trials.
pub const MISSING: &str = "--";

/// One CSV line: a policy's summary on one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub policy: String,
    pub env: String,
    pub n_trials: usize,
    pub budget: u64,
    pub failure_rate: f64,
    pub worst_mean: Option<f64>,
    pub avg_mean: Option<f64>,
}

impl From<&MetricsReport> for TableRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            policy: r.policy.clone(),
            env: r.env.clone(),
            n_trials: r.n_trials(),
            budget: r.budget,
            failure_rate: r.failure_rate,
            worst_mean: r.worst_mean,
            avg_mean: r.avg_mean,
        }
    }
}

/// Rendered comparison: aligned text for people, CSV for tools.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub text: String,
    pub csv: String,
}

fn optional(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), |v| v.to_string())
}

/// Floats are written in their shortest exact form, so parsing restores
/// them bit for bit.
pub fn rows_to_csv(rows: &[TableRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.env.clone(),
            r.n_trials.to_string(),
            r.budget.to_string(),
            r.failure_rate.to_string(),
            optional(r.worst_mean),
            optional(r.avg_mean),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| HarnessError::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Parse(format!("unexpected header {header:?}")));
    }
    let bad = |line: usize, what: &str| HarnessError::Parse(format!("line {line}: bad {what}"));
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| HarnessError::Parse(e.to_string()))?;
        let number = |k: usize, what: &str| record[k].parse::<f64>().map_err(|_| bad(line, what));
        let maybe = |k: usize, what: &str| {
            if &record[k] == MISSING {
                Ok(None)
            } else {
                number(k, what).map(Some)
            }
        };
        rows.push(TableRow {
            policy: record[0].to_string(),
            env: record[1].to_string(),
            n_trials: record[2].parse().map_err(|_| bad(line, "n_trials"))?,
            budget: record[3].parse().map_err(|_| bad(line, "budget"))?,
            failure_rate: number(4, "failure_rate")?,
            worst_mean: maybe(5, "worst_mean")?,
            avg_mean: maybe(6, "avg_mean")?,
        });
    }
    Ok(rows)
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// Policies as rows and, per environment, failure rate and both means as
/// columns.
pub fn emit_table(reports: &[MetricsReport]) -> Table {
    let rows: Vec<TableRow> = reports.iter().map(TableRow::from).collect();
    let policies = first_seen(rows.iter().map(|r| r.policy.as_str()));
    let envs = first_seen(rows.iter().map(|r| r.env.as_str()));
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["policy".to_string()];
    for env in &envs {
        header.extend([format!("{env} failure"), format!("{env} worst"), format!("{env} avg")]);
    }
    grid.push(header);
    for policy in &policies {
        let mut line = vec![policy.to_string()];
        for env in &envs {
            match rows.iter().find(|r| r.policy == *policy && r.env == *env) {
                Some(r) => line.extend([
                    format!("{:.0}%", 100.0 * r.failure_rate),
                    r.worst_mean.map_or(MISSING.into(), |v| format!("{v:.1}")),
                    r.avg_mean.map_or(MISSING.into(), |v| format!("{v:.1}")),
                ]),
                None => line.extend(std::iter::repeat(String::new()).take(3)),
            }
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| grid.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for line in &grid {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        text.push_str(cells.join("  ").trim_end());
        text.push('\n');
    }
    Table {
        text,
        csv: rows_to_csv(&rows),
    }
}

/// Least-squares slope of `log gap` against `log t`. Points with a
/// nonpositive gap are skipped; fewer than two usable points give `None`.
pub fn log_log_slope(points: &[(u64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, g)| *t > 0 && *g > 0.0)
        .map(|&(t, g)| ((t as f64).ln(), g.ln()))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

/// The later half of a history, where the asymptotic rate shows.
pub fn last_half<T>(points: &[T]) -> &[T] {
    &points[points.len() / 2..]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// `t,gap` lines under a header.
    pub csv: String,
    /// Fitted over the last half of the history.
    pub slope: Option<f64>,
}

/// Gap history of `trace` as CSV plus its late log-log slope. A trace
/// without gap tracking yields only the header.
pub fn emit_convergence(trace: &RunTrace) -> Convergence {
    let history = trace.gap_history.as_deref().unwrap_or(&[]);
    let mut csv = String::from("t,gap\n");
    for (t, gap) in history {
        csv.push_str(&format!("{t},{gap}\n"));
    }
    Convergence {
        csv,
        slope: log_log_slope(last_half(history)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TrialMetrics;
    use kexplore::estimation::VisitCounts;
    use kexplore::explorers::Algorithm;
    use kexplore::mdp::TransitionKernel;
    use proptest::prelude::*;

    fn report(policy: &str, env: &str, results: &[(f64, f64)]) -> MetricsReport {
        let trials = results
            .iter()
            .enumerate()
            .map(|(i, &(w, a))| TrialMetrics {
                index: i,
                seed: i as u64,
                worst: w,
                avg: a,
                failed: w.is_infinite(),
                error: None,
            })
            .collect();
        MetricsReport::new(policy, env, 1000, trials)
    }

    #[test]
    fn single_report_single_row() {
        let table = emit_table(&[report("random", "pendulum-5x5", &[(10.0, 4.0), (20.0, 6.0)])]);
        assert_eq!(table.csv.lines().count(), 2);
        assert_eq!(table.text.lines().count(), 2);
        assert_eq!(
            table.csv,
            "policy,env,n_trials,budget,failure_rate,worst_mean,avg_mean\nrandom,pendulum-5x5,2,1000,0,15,5\n"
        );
    }

    #[test]
    fn all_failed_policy_shows_dashes() {
        let inf = f64::INFINITY;
        let table = emit_table(&[report("maxent", "mc", &[(inf, inf), (inf, inf)])]);
        assert!(table.csv.ends_with("maxent,mc,2,1000,1,--,--\n"));
        assert!(table.text.contains("100%") && table.text.contains("--"));
    }

    #[test]
    fn golden_two_policy_fixture() {
        let inf = f64::INFINITY;
        let reports = [
            report("dp-k10", "pendulum-5x5", &[(120.5, 50.25), (130.5, 52.75)]),
            report("random", "pendulum-5x5", &[(inf, inf), (200.0, 60.0), (150.0, 58.0), (100.0, 56.5)]),
        ];
        let table = emit_table(&reports);
        assert_eq!(
            table.csv,
            "policy,env,n_trials,budget,failure_rate,worst_mean,avg_mean\n\
             dp-k10,pendulum-5x5,2,1000,0,125.5,51.5\n\
             random,pendulum-5x5,4,1000,0.25,150,58.166666666666664\n"
        );
        assert_eq!(
            table.text,
            "policy  pendulum-5x5 failure  pendulum-5x5 worst  pendulum-5x5 avg\n\
             dp-k10                    0%               125.5              51.5\n\
             random                   25%               150.0              58.2\n"
        );
        assert_eq!(parse_csv(&table.csv).unwrap(), reports.iter().map(TableRow::from).collect::<Vec<_>>());
    }

    #[test]
    fn environments_become_column_groups() {
        let table = emit_table(&[
            report("a", "e1", &[(1.0, 1.0)]),
            report("a", "e2", &[(2.0, 2.0)]),
            report("b", "e2", &[(3.0, 3.0)]),
        ]);
        let lines: Vec<&str> = table.text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("e1 worst") && lines[0].contains("e2 worst"));
        assert_eq!(table.csv.lines().count(), 4);
    }

    #[test]
    fn parser_rejects_damage() {
        assert!(parse_csv("policy,env\nx,y\n").is_err());
        let good = emit_table(&[report("a", "e", &[(1.0, 1.0)])]).csv;
        assert!(parse_csv(&good.replace(",1,1\n", ",one,1\n")).is_err());
        assert!(parse_csv(&good.replace("a,e,1", "a,e,x")).is_err());
    }

    fn trace_with(history: Option<Vec<(u64, f64)>>) -> RunTrace {
        RunTrace {
            algorithm: Algorithm::Fw,
            counts: VisitCounts::new(1, 1),
            kernel_estimate: TransitionKernel::uniform(1, 1),
            occupancy_history: Vec::new(),
            gap_history: history,
            episodes: 0,
            fallback_episodes: Vec::new(),
        }
    }

    #[test]
    fn empty_history_is_just_the_header() {
        for history in [None, Some(Vec::new())] {
            let out = emit_convergence(&trace_with(history));
            assert_eq!(out.csv, "t,gap\n");
            assert_eq!(out.slope, None);
        }
    }

    #[test]
    fn synthetic_cube_root_rate() {
        let history: Vec<(u64, f64)> = (1..=40u64).map(|m| (50 * m * m * m, 3.0 * (50.0 * (m * m * m) as f64).powf(-1.0 / 3.0))).collect();
        let out = emit_convergence(&trace_with(Some(history)));
        assert!((out.slope.unwrap() + 1.0 / 3.0).abs() < 0.01);
        assert_eq!(out.csv.lines().count(), 41);
    }

    #[test]
    fn slope_skips_nonpositive_gaps() {
        assert_eq!(log_log_slope(&[(10, 1.0), (100, 0.0)]), None);
        let s = log_log_slope(&[(10, 1.0), (100, -1.0), (100, 0.1)]).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }

    fn any_mean() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in prop::collection::vec(
                ("[a-z0-9_.,\" -]{1,12}", "[a-z0-9x-]{1,10}", 1usize..100, 1u64..10_000_000, 0.0f64..=1.0, any_mean(), any_mean()),
                0..8,
            )
        ) {
            let rows: Vec<TableRow> = rows
                .into_iter()
                .map(|(policy, env, n_trials, budget, failure_rate, worst_mean, avg_mean)| TableRow {
                    policy, env, n_trials, budget, failure_rate, worst_mean, avg_mean,
                })
                .collect();
            prop_assert_eq!(parse_csv(&rows_to_csv(&rows)).unwrap(), rows);
        }
    }
}
