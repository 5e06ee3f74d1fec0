//! Convergence, sweep and timing runs, CSV output and the plot script.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tmaris_core::admm::{solve_problem, Problem};
use tmaris_core::system::{linear_to_db, sample_channel};
use tmaris_core::{SolveOutcome, SolverOptions};

use crate::config::{stream, ConfigError, ExperimentConfig, SweepAxis};

/// First line of every CSV this crate writes.
pub const CSV_VERSION_LINE: &str = "# tmaris results v1";
pub const CSV_COLUMNS: &str = "scenario,seed,sweep_value,iter,gamma,min_sinr_db,max_residual,wall_ms";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failed for seed {seed}: {source}")]
    Solver { seed: u64, source: tmaris_core::Error },
    #[error("{what} requires a sweep axis")]
    MissingAxis { what: &'static str },
    #[error("timing runs sweep elements or users, not {0}")]
    TimingAxis(SweepAxis),
    #[error("no result CSVs in {dir}; expected {expected}")]
    MissingCsv { dir: PathBuf, expected: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub iter: usize,
    pub gamma: f64,
    /// Minimum SINR of the power-projected beamformer, in dB.
    pub min_sinr_db: f64,
    pub max_residual: f64,
    pub wall_ms: f64,
}

/// A statistic appended after the result rows. It is written with the
/// result columns: `scenario` holds `<scenario>/<label>`, `gamma` the value,
/// and `seed` is empty for aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub seed: Option<u64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub csv: PathBuf,
}

impl RunOutput {
    pub fn summary_value(&self, label: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.label == label && s.seed.is_none()).map(|s| s.value)
    }
}

fn db(x: f64) -> f64 {
    linear_to_db(x.max(f64::MIN_POSITIVE))
}

/// Solves one `(seed, sweep value)` cell.
pub fn run_cell(
    cfg: &ExperimentConfig,
    seed: u64,
    sweep: Option<(SweepAxis, f64)>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let sys = cfg.system(seed, sweep)?;
    let ch = sample_channel(&sys, &mut stream(seed, 1))
        .map_err(|source| ExperimentError::Solver { seed, source })?;
    let problem =
        Problem::from_config(&sys, &ch).map_err(|source| ExperimentError::Solver { seed, source })?;
    solve_problem(&problem, opts, &mut stream(seed, 2))
        .map_err(|source| ExperimentError::Solver { seed, source })
}

fn trace_rows(
    cfg: &ExperimentConfig,
    seed: u64,
    sweep_value: Option<f64>,
    out: &SolveOutcome,
) -> Vec<ResultRow> {
    let t = &out.trace;
    (0..t.len())
        .map(|i| ResultRow {
            scenario: cfg.scenario.clone(),
            seed,
            sweep_value,
            iter: i + 1,
            gamma: t.gamma[i],
            min_sinr_db: db(t.min_sinr[i]),
            max_residual: t.relative_residual[i],
            wall_ms: if cfg.record_wall_time { t.wall_ms[i] } else { 0.0 },
        })
        .collect()
}

/// Per-iteration traces for every seed at the configured scenario; writes
/// `convergence.csv`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let per_seed: Vec<Vec<ResultRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_cell(cfg, seed, None, &cfg.solver).map(|o| trace_rows(cfg, seed, None, &o)))
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_seed.into_iter().flatten().collect();
    let csv = cfg.out_dir.join("convergence.csv");
    write_csv(&csv, &cfg.scenario, &rows, &[])?;
    Ok(RunOutput { rows, summary: Vec::new(), csv })
}

/// Final min-SINR per `(sweep value, seed)` with paired seeds, plus the
/// per-seed Spearman correlation of min-SINR against the sweep value and
/// its mean (`spearman`). Writes `sweep_<axis>.csv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let axis = cfg.sweep_axis.ok_or(ExperimentError::MissingAxis { what: "sweep" })?;
    let values = cfg.sweep_grid(axis);
    let cells: Vec<(f64, u64)> =
        values.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(v, seed)| {
            let out = run_cell(cfg, seed, Some((axis, v)), &cfg.solver)?;
            let mut row = trace_rows(cfg, seed, Some(v), &out).pop().expect("at least one iteration");
            row.min_sinr_db = db(out.min_sinr);
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    let mut total = 0.0;
    for &seed in &cfg.seeds {
        let y: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.min_sinr_db).collect();
        let rho = spearman(&values, &y);
        total += rho;
        summary.push(SummaryRow { label: "spearman".into(), seed: Some(seed), value: rho });
    }
    summary.push(SummaryRow { label: "spearman".into(), seed: None, value: total / cfg.seeds.len() as f64 });
    for &v in &values {
        let y: Vec<f64> = rows.iter().filter(|r| r.sweep_value == Some(v)).map(|r| r.min_sinr_db).collect();
        summary.push(SummaryRow {
            label: format!("mean_min_sinr_db@{v}"),
            seed: None,
            value: y.iter().sum::<f64>() / y.len() as f64,
        });
    }

    let csv = cfg.out_dir.join(format!("sweep_{axis}.csv"));
    write_csv(&csv, &cfg.scenario, &rows, &summary)?;
    Ok(RunOutput { rows, summary, csv })
}

/// Median per-iteration wall time against the sweep value, run serially.
/// Each value is solved `timing_repeats` times for exactly `timing_iters`
/// iterations on the first seed; `wall_ms` is the median over repeats of the
/// per-run median. The log-log slope is appended as `loglog_slope`.
/// Writes `timing_<axis>.csv`.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let axis = cfg.sweep_axis.ok_or(ExperimentError::MissingAxis { what: "timing" })?;
    if !matches!(axis, SweepAxis::Elements | SweepAxis::Users) {
        return Err(ExperimentError::TimingAxis(axis));
    }
    let values =
        if cfg.sweep_values.is_empty() { axis.default_timing_values() } else { cfg.sweep_values.clone() };
    let opts = SolverOptions {
        max_iters: cfg.timing_iters,
        tolerance: f64::MIN_POSITIVE,
        residual_tolerance: f64::MIN_POSITIVE,
        ..cfg.solver.clone()
    };
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for &v in &values {
        let mut medians = Vec::with_capacity(cfg.timing_repeats);
        let mut last = None;
        for _ in 0..cfg.timing_repeats {
            let out = run_cell(cfg, seed, Some((axis, v)), &opts)?;
            medians.push(median(out.trace.wall_ms.clone()));
            last = Some(out);
        }
        let out = last.expect("timing_repeats is at least 1");
        let mut row = trace_rows(cfg, seed, Some(v), &out).pop().expect("at least one iteration");
        row.min_sinr_db = db(out.min_sinr);
        row.wall_ms = median(medians);
        rows.push(row);
    }
    let x: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.wall_ms.max(f64::MIN_POSITIVE).ln()).collect();
    let summary =
        vec![SummaryRow { label: "loglog_slope".into(), seed: None, value: least_squares_slope(&x, &y) }];
    let csv = cfg.out_dir.join(format!("timing_{axis}.csv"));
    write_csv(&csv, &cfg.scenario, &rows, &summary)?;
    Ok(RunOutput { rows, summary, csv })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the ranks. Zero when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    pearson(&ranks(x), &ranks(y))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_csv(scenario: &str, rows: &[ResultRow], summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_VERSION_LINE}");
    let _ = writeln!(out, "{CSV_COLUMNS}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.seed,
            opt(r.sweep_value),
            r.iter,
            r.gamma,
            r.min_sinr_db,
            r.max_residual,
            r.wall_ms
        );
    }
    for s in summary {
        let seed = s.seed.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{scenario}/{},{seed},,,{},,,", s.label, s.value);
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn write_csv(path: &Path, scenario: &str, rows: &[ResultRow], summary: &[SummaryRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, format_csv(scenario, rows, summary)).map_err(io_err(path))
}

pub const PLOT_SCRIPT: &str = "plot_results.py";

/// Writes `plot_results.py` into `csv_dir`. The script reads the CSVs found
/// there by relative path and renders one figure per file; this function
/// renders nothing itself.
pub fn emit_plots(csv_dir: &Path) -> Result<PathBuf> {
    let mut found: Vec<String> = std::fs::read_dir(csv_dir)
        .map_err(io_err(csv_dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| {
            n == "convergence.csv"
                || (n.ends_with(".csv") && (n.starts_with("sweep_") || n.starts_with("timing_")))
        })
        .collect();
    if found.is_empty() {
        return Err(ExperimentError::MissingCsv {
            dir: csv_dir.to_path_buf(),
            expected: "convergence.csv, sweep_<axis>.csv or timing_<axis>.csv".into(),
        });
    }
    found.sort();
    let list = found.iter().map(|f| format!("    \"{f}\",")).collect::<Vec<_>>().join("\n");
    let script = PLOT_TEMPLATE.replace("@FILES@", &list);
    let path = csv_dir.join(PLOT_SCRIPT);
    std::fs::write(&path, script).map_err(io_err(&path))?;
    Ok(path)
}

const PLOT_TEMPLATE: &str = r##"#!/usr/bin/env python3
# Renders the tmaris result CSVs next to this script. Needs pandas and matplotlib.
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
@FILES@
]


def load(name):
    df = pd.read_csv(os.path.join(HERE, name), comment="#")
    return df[~df["scenario"].astype(str).str.contains("/")]


def convergence(df, out):
    fig, ax = plt.subplots()
    for seed, g in df.groupby("seed"):
        ax.plot(g["iter"], g["min_sinr_db"], lw=0.8, alpha=0.6)
    ax.set_xlabel("iteration")
    ax.set_ylabel("min SINR (dB)")
    fig.savefig(out, dpi=150)


def sweep(df, out, axis):
    fig, ax = plt.subplots()
    m = df.groupby("sweep_value")["min_sinr_db"].mean()
    ax.plot(m.index, m.values, marker="o")
    ax.set_xlabel(axis)
    ax.set_ylabel("mean max-min SINR (dB)")
    fig.savefig(out, dpi=150)


def timing(df, out, axis):
    fig, ax = plt.subplots()
    ax.loglog(df["sweep_value"], df["wall_ms"], marker="o")
    ax.set_xlabel(axis)
    ax.set_ylabel("median time per iteration (ms)")
    fig.savefig(out, dpi=150)


def main():
    for name in FILES:
        df = load(name)
        stem = os.path.splitext(name)[0]
        out = os.path.join(HERE, stem + ".png")
        if stem == "convergence":
            convergence(df, out)
        elif stem.startswith("sweep_"):
            sweep(df, out, stem[len("sweep_"):])
        else:
            timing(df, out, stem[len("timing_"):])
        print("wrote", out, file=sys.stderr)


if __name__ == "__main__":
    main()
"##;
