//! Run configuration, read from and echoed back to TOML.
//!
//! ```toml
//! seed = 0
//! sample_interval = 10.0      # time units between time-series rows
//! mode = "amplitude"          # amplitude | probability | projected_branch
//! score_threshold = 0.8       # ensemble localisation threshold
//! output_dir = "out"
//!
//! [variants]                  # all optional
//! one_molecule_perturbed = false
//! shared_side = false
//! fixed_side = "left"         # omit for random sides
//! probability_weights = false
//!
//! [molecule_a]
//! omega0 = 100.0
//! omega1 = 0.001
//! omega_p = 10.0
//! a = [0.7071067811865476, 0.0]   # energy amplitudes as [re, im]
//! b = [0.7071067811865476, 0.0]
//!
//! [molecule_b]
//! # same keys as molecule_a
//!
//! [[phase]]
//! label = "c"
//! n_collisions = 40
//! t1 = 0.125
//! t2 = 0.375
//! interaction_on = true       # default true
//! interval_base = 120.0       # default 120
//! interval_jitter = 20.0      # default 20
//! # mode = "probability"      # per-phase override
//! ```
//!
//! Unknown keys are rejected. `initial_pair = [[re, im], ×4]` may replace the
//! per-molecule amplitudes with an explicit joint state.

use std::collections::HashSet;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::histories::WeightMode;
use crate::molecule::{energy_to_spatial, EnergyAmplitudes, Frequencies};
use crate::pair::{product_state, PairState};
use crate::protocol::{fig1_protocol, PhaseSpec, Variants};
use crate::smallmat::{Ket, Ket2};

/// TOML integers are signed 64-bit.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Accepted deviation of configured amplitudes from unit norm; they are
/// renormalised exactly after the check.
pub const AMPLITUDE_TOL: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn default_amplitude() -> [f64; 2] {
    [FRAC_1_SQRT_2, 0.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSpec {
    pub omega0: f64,
    pub omega1: f64,
    pub omega_p: f64,
    #[serde(default = "default_amplitude")]
    pub a: [f64; 2],
    #[serde(default = "default_amplitude")]
    pub b: [f64; 2],
}

impl MoleculeSpec {
    pub fn new(f: Frequencies, e: EnergyAmplitudes) -> Self {
        MoleculeSpec {
            omega0: f.omega0,
            omega1: f.omega1,
            omega_p: f.omega_p,
            a: [e.a.re, e.a.im],
            b: [e.b.re, e.b.im],
        }
    }

    pub fn fig1() -> Self {
        Self::new(Frequencies::fig1(), EnergyAmplitudes::equal_superposition())
    }

    pub fn frequencies(&self) -> Frequencies {
        Frequencies {
            omega0: self.omega0,
            omega1: self.omega1,
            omega_p: self.omega_p,
        }
    }

    pub fn amplitudes(&self) -> Result<EnergyAmplitudes, ConfigError> {
        let a = C64::new(self.a[0], self.a[1]);
        let b = C64::new(self.b[0], self.b[1]);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > AMPLITUDE_TOL {
            return Err(invalid(format!(
                "energy amplitudes have norm {n}, expected 1"
            )));
        }
        EnergyAmplitudes::new(a / n, b / n).map_err(|e| invalid(e.to_string()))
    }

    /// Spatial state at `t = 0`.
    pub fn initial_spatial(&self) -> Result<Ket2, ConfigError> {
        Ok(energy_to_spatial(
            &self.amplitudes()?,
            &self.frequencies(),
            0.0,
        ))
    }
}

fn default_sample_interval() -> f64 {
    10.0
}

fn default_mode() -> WeightMode {
    WeightMode::Amplitude
}

fn default_threshold() -> f64 {
    0.8
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_mode")]
    pub mode: WeightMode,
    #[serde(default = "default_threshold")]
    pub score_threshold: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pair: Option<[[f64; 2]; 4]>,
    #[serde(default)]
    pub variants: Variants,
    pub molecule_a: MoleculeSpec,
    pub molecule_b: MoleculeSpec,
    #[serde(default, rename = "phase")]
    pub phases: Vec<PhaseSpec>,
}

impl RunConfig {
    /// The reference five-phase experiment at its published parameters.
    pub fn fig1(seed: u64) -> Self {
        RunConfig {
            seed,
            sample_interval: default_sample_interval(),
            mode: default_mode(),
            score_threshold: default_threshold(),
            output_dir: default_output_dir(),
            initial_pair: None,
            variants: Variants::default(),
            molecule_a: MoleculeSpec::fig1(),
            molecule_b: MoleculeSpec::fig1(),
            phases: fig1_protocol(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always serialises")
    }

    pub fn initial_pair_state(&self) -> Result<PairState, ConfigError> {
        match &self.initial_pair {
            Some(amps) => {
                let psi = Ket(amps.map(|[re, im]| C64::new(re, im)));
                let n = psi.norm();
                if !n.is_finite() || (n - 1.0).abs() > AMPLITUDE_TOL {
                    return Err(invalid(format!("initial_pair has norm {n}, expected 1")));
                }
                Ok(PairState {
                    psi: psi.scale(C64::new(1.0 / n, 0.0)),
                    time: 0.0,
                })
            }
            None => Ok(product_state(
                &self.molecule_a.initial_spatial()?,
                &self.molecule_b.initial_spatial()?,
            )),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, m) in [
            ("molecule_a", &self.molecule_a),
            ("molecule_b", &self.molecule_b),
        ] {
            m.frequencies()
                .validate()
                .map_err(|e| invalid(format!("{name}: {e}")))?;
            m.amplitudes()
                .map_err(|e| invalid(format!("{name}: {e}")))?;
        }
        self.initial_pair_state()?;
        if self.seed > MAX_SEED {
            return Err(invalid(format!("seed must be at most {MAX_SEED}")));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(invalid("sample_interval must be positive"));
        }
        if !(self.score_threshold > 0.0 && self.score_threshold <= 1.0) {
            return Err(invalid("score_threshold must lie in (0, 1]"));
        }
        let mut labels = HashSet::new();
        for p in &self.phases {
            validate_phase(p)?;
            if !labels.insert(p.label.as_str()) {
                return Err(invalid(format!("duplicate phase label {:?}", p.label)));
            }
        }
        Ok(())
    }
}

fn validate_phase(p: &PhaseSpec) -> Result<(), ConfigError> {
    let ctx = |msg: &str| invalid(format!("phase {:?}: {msg}", p.label));
    if p.label.is_empty()
        || !p
            .label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(ctx("label must be non-empty and use only [A-Za-z0-9_-]"));
    }
    if !(p.t1.is_finite() && p.t2.is_finite() && p.t1 >= 0.0 && p.t2 >= 0.0) {
        return Err(ctx("durations must be finite and >= 0"));
    }
    if !(p.interval_base.is_finite() && p.interval_base > 0.0) {
        return Err(ctx("interval_base must be positive"));
    }
    if !(p.interval_jitter.is_finite()
        && p.interval_jitter >= 0.0
        && p.interval_jitter <= p.interval_base)
    {
        return Err(ctx("interval_jitter must lie in [0, interval_base]"));
    }
    let (t1, t2) = p.effective_durations();
    if p.interval_base - p.interval_jitter < t1.max(t2) {
        return Err(ctx(
            "shortest interval is shorter than the collision window max(t1, t2)",
        ));
    }
    Ok(())
}
