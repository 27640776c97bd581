//! Experiment orchestration and file outputs.
//!
//! A single run writes `timeseries.csv`, one `snapshot_<label>.txt` per
//! phase, `summary.json` and `config_echo.toml`. Ensembles run seeds
//! `0..n` in parallel and write `ensemble_summary.json`; sweeps write
//! `sweep_<param>.csv`. Files are rendered only after every run finished.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{summarise_ensemble, AnalysisError, EnsembleSummary, RunRecord, Snapshot};
use crate::config::{ConfigError, RunConfig};
use crate::histories::WeightMode;
use crate::protocol::{run_simulation, DegenerateRun, RunError};
use crate::smallmat::Op4;

pub const OUTPUT_DIR_ENV: &str = "HISTLOC_OUTPUT_DIR";

pub const TIMESERIES_HEADER: &str =
    "time,reduced_left_A,reduced_left_B,localisation_score,purity_A,purity_B,norm_contraction,phase_label";

#[derive(Error, Debug)]
pub enum RunnerError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("seed {seed}: {run}")]
    Degenerate {
        seed: u64,
        run: Box<DegenerateRun>,
        diagnostic: Option<PathBuf>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Run(RunError),
}

impl RunnerError {
    /// Process exit status: 1 usage or config, 2 degenerate run, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Usage(_)
            | RunnerError::Config(_)
            | RunnerError::Analysis(_)
            | RunnerError::Run(_) => 1,
            RunnerError::Degenerate { .. } => 2,
            RunnerError::Io { .. } => 3,
        }
    }
}

impl std::fmt::Display for DegenerateRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "degenerate branch superposition in phase {} at t = {} (norm {:.3e})",
            self.phase_label, self.event.time, self.norm
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunnerError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn ensure_dir(dir: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Reads and validates a TOML config. A missing file is a config error.
pub fn load_config(path: &Path) -> Result<RunConfig, RunnerError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(RunConfig::from_toml_str(&text)?)
}

/// Output directory: explicit flag, then the environment, then the config.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&str>, config: &RunConfig) -> PathBuf {
    match (flag, env) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(e)) if !e.is_empty() => PathBuf::from(e),
        _ => PathBuf::from(&config.output_dir),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputBundle {
    pub timeseries: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub summary: PathBuf,
    pub config_echo: PathBuf,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_timeseries(record: &RunRecord) -> String {
    let mut out = String::with_capacity(160 * (record.samples.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in &record.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(s.time),
            num(s.reduced_left_a),
            num(s.reduced_left_b),
            num(s.localisation_score),
            num(s.purity_a),
            num(s.purity_b),
            num(s.norm_contraction),
            s.phase_label
        );
    }
    out
}

pub fn render_matrix(m: &Op4) -> String {
    let mut out = String::new();
    for row in &m.0 {
        let cells: Vec<String> = row
            .iter()
            .map(|c| format!("{:.16e}{:+.16e}i", c.re, c.im))
            .collect();
        out.push_str(&cells.join("  "));
        out.push('\n');
    }
    out
}

pub fn render_snapshot(s: &Snapshot) -> String {
    format!(
        "# phase {} t = {}\n{}",
        s.label,
        num(s.time),
        render_matrix(&s.density)
    )
}

fn matrix_json(m: &Op4) -> Value {
    json!(m
        .0
        .iter()
        .map(|row| row.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

pub fn render_summary(record: &RunRecord) -> String {
    let snapshots: Vec<Value> = record
        .snapshots
        .iter()
        .map(|s| {
            json!({
                "label": s.label,
                "time": s.time,
                "localisation_score": crate::analysis::localisation_score(&s.density),
            })
        })
        .collect();
    let contraction = record
        .collisions
        .iter()
        .map(|c| c.norm_contraction)
        .fold(1.0f64, f64::min);
    let v = json!({
        "seed": record.config_echo.seed,
        "final_time": record.final_state.time,
        "terminal_score": record.terminal_score(),
        "terminal_well": { "A": record.terminal_well[0], "B": record.terminal_well[1] },
        "n_samples": record.samples.len(),
        "n_collisions": record.collisions.len(),
        "min_norm_contraction": contraction,
        "snapshots": snapshots,
        "final_density_matrix": matrix_json(&record.final_state.density_matrix()),
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serialises");
    s.push('\n');
    s
}

pub fn render_degenerate(seed: u64, run: &DegenerateRun) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "degenerate branch superposition");
    let _ = writeln!(out, "seed = {seed}");
    let _ = writeln!(out, "phase = {}", run.phase_label);
    let _ = writeln!(out, "time = {}", num(run.event.time));
    let _ = writeln!(out, "side_a = {:?}", run.event.side_a);
    let _ = writeln!(out, "side_b = {:?}", run.event.side_b);
    let _ = writeln!(out, "branch_source = {:?}", run.event.branch_source);
    let _ = writeln!(
        out,
        "t1 = {}  t2 = {}",
        num(run.event.t1),
        num(run.event.t2)
    );
    let _ = writeln!(out, "norm = {}", num(run.norm));
    let _ = writeln!(out, "state before collision:");
    for c in &run.state {
        let _ = writeln!(out, "{:.16e}{:+.16e}i", c.re, c.im);
    }
    out
}

/// Runs one seed without touching the filesystem.
pub fn simulate(config: &RunConfig) -> Result<RunRecord, RunnerError> {
    run_simulation(config).map_err(|e| match e {
        RunError::Config(c) => RunnerError::Config(c),
        RunError::Degenerate(run) => RunnerError::Degenerate {
            seed: config.seed,
            run,
            diagnostic: None,
        },
        other => RunnerError::Run(other),
    })
}

/// Writes the diagnostic for a degenerate abort into `dir` and records its path.
fn with_diagnostic(err: RunnerError, dir: &Path) -> RunnerError {
    match err {
        RunnerError::Degenerate { seed, run, .. } => {
            let path = dir.join("degenerate.txt");
            if let Err(e) =
                ensure_dir(dir).and_then(|_| write_file(&path, &render_degenerate(seed, &run)))
            {
                return e;
            }
            RunnerError::Degenerate {
                seed,
                run,
                diagnostic: Some(path),
            }
        }
        other => other,
    }
}

pub fn write_run(record: &RunRecord, dir: &Path) -> Result<OutputBundle, RunnerError> {
    ensure_dir(dir)?;
    let timeseries = dir.join("timeseries.csv");
    write_file(&timeseries, &render_timeseries(record))?;
    let mut snapshots = Vec::with_capacity(record.snapshots.len());
    for s in &record.snapshots {
        let path = dir.join(format!("snapshot_{}.txt", s.label));
        write_file(&path, &render_snapshot(s))?;
        snapshots.push(path);
    }
    let summary = dir.join("summary.json");
    write_file(&summary, &render_summary(record))?;
    let config_echo = dir.join("config_echo.toml");
    write_file(&config_echo, &record.config_echo.to_toml_string())?;
    Ok(OutputBundle {
        timeseries,
        snapshots,
        summary,
        config_echo,
    })
}

/// Validates, runs and writes one configuration. Invalid configs write nothing.
pub fn run_to_dir(
    config: &RunConfig,
    dir: &Path,
) -> Result<(RunRecord, OutputBundle), RunnerError> {
    config.validate()?;
    let record = simulate(config).map_err(|e| with_diagnostic(e, dir))?;
    let bundle = write_run(&record, dir)?;
    Ok((record, bundle))
}

/// Runs seeds `0..n_seeds` concurrently; records come back sorted by seed.
pub fn run_ensemble(
    config: &RunConfig,
    n_seeds: u64,
) -> Result<(Vec<RunRecord>, EnsembleSummary), RunnerError> {
    if n_seeds == 0 {
        return Err(RunnerError::Usage("n-seeds must be at least 1".into()));
    }
    config.validate()?;
    let results: Vec<Result<RunRecord, RunnerError>> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            let mut c = config.clone();
            c.seed = seed;
            simulate(&c)
        })
        .collect();
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = summarise_ensemble(&records, config.score_threshold)?;
    Ok((records, summary))
}

pub fn render_ensemble_summary(summary: &EnsembleSummary) -> String {
    let per_seed: Vec<Value> = summary
        .terminal_scores
        .iter()
        .map(|(seed, score)| json!({ "seed": seed, "terminal_score": score }))
        .collect();
    let v = json!({
        "n_runs": summary.n_runs,
        "score_threshold": summary.score_threshold,
        "localisation_rate": summary.localisation_rate,
        "mean_terminal_score": summary.mean_terminal_score,
        "well_frequency": { "left": summary.well_frequency.0, "right": summary.well_frequency.1 },
        "averaged_density_matrix": matrix_json(&summary.averaged_density_matrix),
        "time_averaged_density_matrix": matrix_json(&summary.time_averaged_density_matrix),
        "terminal_scores": per_seed,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serialises");
    s.push('\n');
    s
}

pub fn ensemble_to_dir(
    config: &RunConfig,
    n_seeds: u64,
    dir: &Path,
) -> Result<(EnsembleSummary, PathBuf), RunnerError> {
    let (_, summary) = run_ensemble(config, n_seeds).map_err(|e| with_diagnostic(e, dir))?;
    ensure_dir(dir)?;
    let path = dir.join("ensemble_summary.json");
    write_file(&path, &render_ensemble_summary(&summary))?;
    Ok((summary, path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Omega1,
    OmegaP,
    T1,
    T2,
    Mode,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega1 => "omega1",
            SweepParam::OmegaP => "omegaP",
            SweepParam::T1 => "t1",
            SweepParam::T2 => "t2",
            SweepParam::Mode => "mode",
        }
    }

    /// Copy of `config` with this parameter set to `value`. Frequencies
    /// apply to both molecules, durations to every interacting phase.
    pub fn apply(self, config: &RunConfig, value: &str) -> Result<RunConfig, RunnerError> {
        let bad = || RunnerError::Usage(format!("invalid value {value:?} for {}", self.name()));
        let mut c = config.clone();
        match self {
            SweepParam::Mode => c.mode = WeightMode::parse(value).ok_or_else(bad)?,
            _ => {
                let x: f64 = value.trim().parse().map_err(|_| bad())?;
                match self {
                    SweepParam::Omega1 => {
                        c.molecule_a.omega1 = x;
                        c.molecule_b.omega1 = x;
                    }
                    SweepParam::OmegaP => {
                        c.molecule_a.omega_p = x;
                        c.molecule_b.omega_p = x;
                    }
                    SweepParam::T1 | SweepParam::T2 => {
                        for p in c.phases.iter_mut().filter(|p| p.interaction_on) {
                            if self == SweepParam::T1 {
                                p.t1 = x;
                            } else {
                                p.t2 = x;
                            }
                        }
                    }
                    SweepParam::Mode => unreachable!(),
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "omega1" => Ok(SweepParam::Omega1),
            "omegaP" | "omega_p" => Ok(SweepParam::OmegaP),
            "t1" => Ok(SweepParam::T1),
            "t2" => Ok(SweepParam::T2),
            "mode" => Ok(SweepParam::Mode),
            _ => Err(RunnerError::Usage(format!(
                "unknown sweep parameter {s:?} (expected omega1, omegaP, t1, t2 or mode)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub localisation_rate: f64,
    pub mean_terminal_score: f64,
}

/// One ensemble per value; every value is validated before any run starts.
pub fn run_sweep(
    config: &RunConfig,
    param: SweepParam,
    values: &[String],
    n_seeds: u64,
) -> Result<Vec<SweepPoint>, RunnerError> {
    if values.is_empty() {
        return Err(RunnerError::Usage("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| param.apply(config, v))
        .collect::<Result<Vec<_>, _>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(c, v)| {
            let (_, s) = run_ensemble(c, n_seeds)?;
            Ok(SweepPoint {
                value: v.trim().to_string(),
                localisation_rate: s.localisation_rate,
                mean_terminal_score: s.mean_terminal_score,
            })
        })
        .collect()
}

pub fn render_sweep(param: SweepParam, points: &[SweepPoint]) -> String {
    let mut out = format!("{},localisation_rate,mean_terminal_score\n", param.name());
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.value,
            num(p.localisation_rate),
            num(p.mean_terminal_score)
        );
    }
    out
}

pub fn sweep_to_dir(
    config: &RunConfig,
    param: SweepParam,
    values: &[String],
    n_seeds: u64,
    dir: &Path,
) -> Result<(Vec<SweepPoint>, PathBuf), RunnerError> {
    let points = run_sweep(config, param, values, n_seeds).map_err(|e| with_diagnostic(e, dir))?;
    ensure_dir(dir)?;
    let path = dir.join(format!("sweep_{}.csv", param.name()));
    write_file(&path, &render_sweep(param, &points))?;
    Ok((points, path))
}
