//! A single double-well molecule.
//!
//! The spatial basis is `{|L⟩, |R⟩}`. Energy eigenstates follow the sign
//! layout `Ψ₀ = (−|L⟩ + |R⟩)/√2`, `Ψ₁ = (|L⟩ + |R⟩)/√2`, which makes the
//! energy-to-spatial expansion agree exactly with free evolution under
//! [`free_hamiltonian`] and the `exp(+iHt)` propagator convention.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smallmat::{eig2_hermitian, outer_unchecked, Ket2, Op, Op2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MoleculeError {
    #[error("invalid frequencies: {0}")]
    Frequencies(String),
    #[error("energy amplitudes are not normalised (|a|²+|b|² = {0})")]
    NotNormalised(f64),
}

/// Angular frequencies defining one molecule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frequencies {
    /// Ground frequency of each isolated well.
    pub omega0: f64,
    /// Tunnelling splitting between the symmetric and antisymmetric states.
    pub omega1: f64,
    /// Energy shift of a well while it is perturbed by a collision.
    pub omega_p: f64,
}

impl Frequencies {
    pub fn new(omega0: f64, omega1: f64, omega_p: f64) -> Result<Self, MoleculeError> {
        let f = Frequencies {
            omega0,
            omega1,
            omega_p,
        };
        f.validate()?;
        Ok(f)
    }

    /// ω₀ = 100, ω₁ = 10⁻³, ωₚ = 10.
    pub fn fig1() -> Self {
        Frequencies {
            omega0: 100.0,
            omega1: 1e-3,
            omega_p: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), MoleculeError> {
        if !(self.omega0.is_finite() && self.omega1.is_finite() && self.omega_p.is_finite()) {
            return Err(MoleculeError::Frequencies(
                "all frequencies must be finite".into(),
            ));
        }
        if self.omega1 < 0.0 {
            return Err(MoleculeError::Frequencies("omega1 must be >= 0".into()));
        }
        if self.omega_p < 0.0 {
            return Err(MoleculeError::Frequencies("omega_p must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Basis index in `{|L⟩, |R⟩}`.
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Coefficients `(a, b)` of the state in the energy basis `{Ψ₀, Ψ₁}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAmplitudes {
    pub a: C64,
    pub b: C64,
}

impl EnergyAmplitudes {
    pub fn new(a: C64, b: C64) -> Result<Self, MoleculeError> {
        let n = a.norm_sqr() + b.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
            return Err(MoleculeError::NotNormalised(n));
        }
        Ok(EnergyAmplitudes { a, b })
    }

    pub fn real(a: f64, b: f64) -> Result<Self, MoleculeError> {
        Self::new(C64::new(a, 0.0), C64::new(b, 0.0))
    }

    /// `a = b = 1/√2`
    pub fn equal_superposition() -> Self {
        let c = C64::new(FRAC_1_SQRT_2, 0.0);
        EnergyAmplitudes { a: c, b: c }
    }
}

/// `[[ω₀, ω₁/2], [ω₁/2, ω₀]]`
pub fn free_hamiltonian(f: &Frequencies) -> Op2 {
    let half = 0.5 * f.omega1;
    Op2::from_real([[f.omega0, half], [half, f.omega0]])
}

/// The free Hamiltonian with `ωₚ` added to the diagonal entry of `side`.
pub fn perturbed_hamiltonian(f: &Frequencies, side: Side) -> Op2 {
    let mut h = free_hamiltonian(f);
    let i = side.index();
    h.0[i][i] += f.omega_p;
    h
}

/// Spatial coefficients `(α(t), β(t))` including the global `e^{iω₀t}`.
pub fn energy_to_spatial(e: &EnergyAmplitudes, f: &Frequencies, t: f64) -> Ket2 {
    let global = C64::from_polar(FRAC_1_SQRT_2, f.omega0 * t);
    let lower = e.a * C64::from_polar(1.0, -0.5 * f.omega1 * t);
    let upper = e.b * C64::from_polar(1.0, 0.5 * f.omega1 * t);
    Ket2::new([(-lower + upper) * global, (lower + upper) * global])
}

/// Spatial density matrix `ρᵢⱼ = cᵢ·conj(cⱼ)` of the state at time `t`.
pub fn spatial_density_matrix(e: &EnergyAmplitudes, f: &Frequencies, t: f64) -> Op2 {
    outer_unchecked(&energy_to_spatial(e, f, t))
}

/// Density matrix in the energy basis: diagonal `|a|², |b|²`, upper
/// off-diagonal `a·b*·e^{−iω₁t}`.
pub fn energy_density_matrix(e: &EnergyAmplitudes, f: &Frequencies, t: f64) -> Op2 {
    let coherence = e.a * e.b.conj() * C64::from_polar(1.0, -f.omega1 * t);
    Op([
        [C64::new(e.a.norm_sqr(), 0.0), coherence],
        [coherence.conj(), C64::new(e.b.norm_sqr(), 0.0)],
    ])
}

pub fn free_propagator(f: &Frequencies, dt: f64) -> Op2 {
    eig2_hermitian(&free_hamiltonian(f)).propagator(dt)
}

pub fn perturbed_propagator(f: &Frequencies, side: Side, dt: f64) -> Op2 {
    eig2_hermitian(&perturbed_hamiltonian(f, side)).propagator(dt)
}

pub fn evolve_free(psi: &Ket2, f: &Frequencies, dt: f64) -> Ket2 {
    free_propagator(f, dt).apply(psi)
}

pub fn evolve_perturbed(psi: &Ket2, f: &Frequencies, side: Side, dt: f64) -> Ket2 {
    perturbed_propagator(f, side, dt).apply(psi)
}
