//! Observables and statistics over completed runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::molecule::Side;
use crate::pair::{MoleculeId, PairState};
use crate::smallmat::{outer_unchecked, Ket4, Op, Op4};

/// Reduced left population above which a molecule counts as localised left.
pub const LEFT_WELL_THRESHOLD: f64 = 0.8;
/// Reduced left population below which a molecule counts as localised right.
pub const RIGHT_WELL_THRESHOLD: f64 = 0.2;

/// Smallest peak-to-peak half amplitude accepted by [`rabi_period`].
pub const MIN_RABI_AMPLITUDE: f64 = 0.05;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("cannot average an empty stream")]
    EmptyStream,
    #[error("no runs to summarise")]
    NoRuns,
    #[error("runs do not share a phase layout")]
    MixedConfigs,
    #[error("oscillation amplitude {0:.3e} is too small to estimate a period")]
    AmplitudeTooSmall(f64),
    #[error("series crosses its mean only {0} times; need at least 3")]
    TooFewCrossings(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalWell {
    Left,
    Right,
    Mixed,
}

pub fn classify_well(reduced_left: f64) -> TerminalWell {
    if reduced_left > LEFT_WELL_THRESHOLD {
        TerminalWell::Left
    } else if reduced_left < RIGHT_WELL_THRESHOLD {
        TerminalWell::Right
    } else {
        TerminalWell::Mixed
    }
}

impl From<Side> for TerminalWell {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => TerminalWell::Left,
            Side::Right => TerminalWell::Right,
        }
    }
}

/// One row of the time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub reduced_left_a: f64,
    pub reduced_left_b: f64,
    /// Max diagonal of the full 4×4 density matrix.
    pub localisation_score: f64,
    pub purity_a: f64,
    pub purity_b: f64,
    /// Contraction of the most recent collision (1 before the first).
    pub norm_contraction: f64,
    pub phase_label: String,
    pub psi: Ket4,
}

impl Sample {
    pub fn density(&self) -> Op4 {
        outer_unchecked(&self.psi)
    }
}

/// State right after one collision.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionLog {
    pub time: f64,
    pub phase_index: usize,
    pub side_a: Side,
    pub side_b: Side,
    pub branch_source: MoleculeId,
    pub localisation_score: f64,
    pub reduced_left_a: f64,
    pub reduced_left_b: f64,
    pub norm_contraction: f64,
    /// Norm of the stored state after renormalisation.
    pub norm_after: f64,
}

/// Full pair density matrix at the end of a phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub time: f64,
    pub density: Op4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub collisions: Vec<CollisionLog>,
    pub config_echo: RunConfig,
    pub final_state: PairState,
    pub terminal_well: [TerminalWell; 2],
}

impl RunRecord {
    pub(crate) fn empty(config: RunConfig, initial: PairState) -> Self {
        RunRecord {
            samples: Vec::new(),
            snapshots: Vec::new(),
            collisions: Vec::new(),
            config_echo: config,
            final_state: initial,
            terminal_well: [TerminalWell::Mixed; 2],
        }
    }

    pub(crate) fn finish(&mut self, state: PairState) {
        self.final_state = state;
        self.terminal_well = crate::protocol::terminal_wells(&state);
    }

    pub fn terminal_score(&self) -> f64 {
        localisation_score(&self.final_state.density_matrix())
    }

    /// Collisions belonging to phase `index`, in order.
    pub fn phase_collisions(&self, index: usize) -> impl Iterator<Item = &CollisionLog> {
        self.collisions
            .iter()
            .filter(move |c| c.phase_index == index)
    }

    /// Entrywise mean of the sampled pair density matrices.
    pub fn time_averaged_density(&self) -> Result<Op4, AnalysisError> {
        running_average(self.samples.iter().map(Sample::density))
    }
}

/// Largest diagonal entry.
pub fn localisation_score<const N: usize>(rho: &Op<N>) -> f64 {
    rho.diagonal()
        .into_iter()
        .fold(f64::MIN, f64::max)
        .clamp(0.0, 1.0)
}

/// `Tr(ρ²)`
pub fn purity<const N: usize>(rho: &Op<N>) -> f64 {
    (*rho * *rho).trace().re
}

/// Entrywise arithmetic mean of a stream of matrices.
pub fn running_average<const N: usize, I>(stream: I) -> Result<Op<N>, AnalysisError>
where
    I: IntoIterator<Item = Op<N>>,
{
    let mut sum = Op::<N>::zero();
    let mut count = 0usize;
    for m in stream {
        sum = sum + m;
        count += 1;
    }
    if count == 0 {
        return Err(AnalysisError::EmptyStream);
    }
    Ok(sum.scale((1.0 / count as f64).into()))
}

/// Period of an oscillating `(time, value)` series.
///
/// Crossings of the series mean are located by linear interpolation; the
/// period is the mean gap between every other crossing, which stays exact
/// for a pure sinusoid even when the sampled window biases the mean.
pub fn rabi_period(samples: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    let amplitude = if samples.is_empty() {
        0.0
    } else {
        0.5 * (hi - lo)
    };
    if amplitude < MIN_RABI_AMPLITUDE {
        return Err(AnalysisError::AmplitudeTooSmall(amplitude));
    }
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    let crossings: Vec<f64> = samples
        .windows(2)
        .filter_map(|w| {
            let (t0, y0) = (w[0].0, w[0].1 - mean);
            let (t1, y1) = (w[1].0, w[1].1 - mean);
            if (y0 < 0.0 && y1 >= 0.0) || (y0 >= 0.0 && y1 < 0.0) {
                Some(t0 + (t1 - t0) * y0 / (y0 - y1))
            } else {
                None
            }
        })
        .collect();
    let n = crossings.len();
    if n < 3 {
        return Err(AnalysisError::TooFewCrossings(n));
    }
    let span: f64 = (0..n - 2).map(|i| crossings[i + 2] - crossings[i]).sum();
    Ok(span / (n - 2) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub n_runs: usize,
    pub score_threshold: f64,
    /// Fraction of runs whose terminal score reaches the threshold.
    pub localisation_rate: f64,
    pub mean_terminal_score: f64,
    /// Mean of the terminal pair density matrices.
    pub averaged_density_matrix: Op4,
    /// Mean over runs of each run's time-averaged density matrix.
    pub time_averaged_density_matrix: Op4,
    /// `(left, right)` fractions over all molecules of all runs.
    pub well_frequency: (f64, f64),
    /// `(seed, terminal score)` sorted by seed.
    pub terminal_scores: Vec<(u64, f64)>,
}

pub fn summarise_ensemble(
    records: &[RunRecord],
    score_threshold: f64,
) -> Result<EnsembleSummary, AnalysisError> {
    let first = records.first().ok_or(AnalysisError::NoRuns)?;
    let layout = |r: &RunRecord| -> Vec<(String, usize)> {
        r.config_echo
            .phases
            .iter()
            .map(|p| (p.label.clone(), p.n_collisions))
            .collect()
    };
    let reference = layout(first);
    if records.iter().any(|r| layout(r) != reference) {
        return Err(AnalysisError::MixedConfigs);
    }

    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.config_echo.seed);

    let n = sorted.len();
    let terminal_scores: Vec<(u64, f64)> = sorted
        .iter()
        .map(|r| (r.config_echo.seed, r.terminal_score()))
        .collect();
    let localised = terminal_scores
        .iter()
        .filter(|s| s.1 >= score_threshold)
        .count();
    let mean_terminal_score = terminal_scores.iter().map(|s| s.1).sum::<f64>() / n as f64;
    let averaged_density_matrix =
        running_average(sorted.iter().map(|r| r.final_state.density_matrix()))?;
    let time_averaged_density_matrix = running_average(
        sorted
            .iter()
            .map(|r| r.time_averaged_density())
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let wells: Vec<TerminalWell> = sorted.iter().flat_map(|r| r.terminal_well).collect();
    let frac =
        |w: TerminalWell| wells.iter().filter(|&&x| x == w).count() as f64 / wells.len() as f64;

    Ok(EnsembleSummary {
        n_runs: n,
        score_threshold,
        localisation_rate: localised as f64 / n as f64,
        mean_terminal_score,
        averaged_density_matrix,
        time_averaged_density_matrix,
        well_frequency: (frac(TerminalWell::Left), frac(TerminalWell::Right)),
        terminal_scores,
    })
}
