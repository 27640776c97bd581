//! Fixed-size complex linear algebra for the 2- and 4-dimensional Hilbert
//! spaces used by the simulator.
//!
//! Vectors are ordered `{|L⟩, |R⟩}` for one molecule and
//! `{|LL⟩, |LR⟩, |RL⟩, |RR⟩}` (molecule A index major) for a pair. Only 2×2
//! Hermitian matrices are ever diagonalised; every 4×4 propagator is built
//! as a Kronecker product of 2×2 propagators.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::pair::MoleculeId;

/// Absolute tolerance for Hermiticity checks, scaled by `max(1, ‖H‖∞)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum deviation of `‖ψ‖` from 1 accepted where a normalised input is required.
pub const NORMALISED_TOL: f64 = 1e-9;

/// Components below this magnitude are treated as zero when fixing the
/// eigenvector phase.
const PHASE_FLOOR: f64 = 1e-14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("state vector is not normalised (norm {norm})")]
    NotNormalised { norm: f64 },
    #[error("cannot normalise a zero vector")]
    ZeroVector,
}

/// A state vector of fixed dimension in the spatial basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket<const N: usize>(pub [C64; N]);

pub type Ket2 = Ket<2>;
pub type Ket4 = Ket<4>;

impl<const N: usize> Ket<N> {
    pub fn new(amplitudes: [C64; N]) -> Self {
        Ket(amplitudes)
    }

    pub fn zero() -> Self {
        Ket([ZERO; N])
    }

    /// Unit vector along basis index `i`.
    pub fn basis(i: usize) -> Self {
        let mut k = Self::zero();
        k.0[i] = ONE;
        k
    }

    pub fn from_real(values: [f64; N]) -> Self {
        Ket(values.map(|x| C64::new(x, 0.0)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Ket(self.0.map(|x| x * c))
    }

    /// Probabilities `|cᵢ|²`.
    pub fn probabilities(&self) -> [f64; N] {
        self.0.map(|c| c.norm_sqr())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest componentwise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Distance to `other` after removing the best global phase,
    /// `sqrt(2 − 2|⟨self|other⟩|)` for unit vectors.
    pub fn phase_insensitive_distance(&self, other: &Self) -> f64 {
        let overlap = self.inner(other).norm();
        (self.norm_sqr() + other.norm_sqr() - 2.0 * overlap)
            .max(0.0)
            .sqrt()
    }

    pub(crate) fn ensure_normalised(&self) -> Result<(), LinalgError> {
        let norm = self.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORMALISED_TOL {
            return Err(LinalgError::NotNormalised { norm });
        }
        Ok(())
    }
}

impl<const N: usize> Add for Ket<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0) {
            *o += r;
        }
        out
    }
}

impl<const N: usize> Sub for Ket<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        out
    }
}

impl<const N: usize> Mul<Ket<N>> for C64 {
    type Output = Ket<N>;
    fn mul(self, rhs: Ket<N>) -> Ket<N> {
        rhs.scale(self)
    }
}

impl<const N: usize> Mul<Ket<N>> for f64 {
    type Output = Ket<N>;
    fn mul(self, rhs: Ket<N>) -> Ket<N> {
        rhs.scale(C64::new(self, 0.0))
    }
}

/// A dense square complex matrix of fixed dimension.
///
/// Used for Hamiltonians, propagators and density matrices alike; the
/// constructors that require Hermiticity check it explicitly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Op<const N: usize>(pub [[C64; N]; N]);

pub type Op2 = Op<2>;
pub type Op4 = Op<4>;

impl<const N: usize> Op<N> {
    pub fn zero() -> Self {
        Op([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_real(rows: [[f64; N]; N]) -> Self {
        Op(rows.map(|r| r.map(|x| C64::new(x, 0.0))))
    }

    pub fn diagonal_real(diag: [f64; N]) -> Self {
        let mut m = Self::zero();
        for (i, d) in diag.into_iter().enumerate() {
            m.0[i][i] = C64::new(d, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// Real parts of the diagonal.
    pub fn diagonal(&self) -> [f64; N] {
        std::array::from_fn(|i| self.0[i][i].re)
    }

    pub fn apply(&self, psi: &Ket<N>) -> Ket<N> {
        Ket(std::array::from_fn(|i| {
            (0..N).map(|j| self.0[i][j] * psi.0[j]).sum()
        }))
    }

    pub fn scale(&self, c: C64) -> Self {
        Op(self.0.map(|r| r.map(|x| x * c)))
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..N {
            for j in 0..N {
                d = d.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Self::zero())
    }

    /// Largest `|Hᵢⱼ − conj(Hⱼᵢ)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `max |U†U − I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn ensure_hermitian(&self) -> Result<(), LinalgError> {
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(LinalgError::NotHermitian { deviation });
        }
        Ok(())
    }
}

impl<const N: usize> Mul for Op<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Op(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..N).map(|k| self.0[i][k] * rhs.0[k][j]).sum())
        }))
    }
}

impl<const N: usize> Mul<Ket<N>> for Op<N> {
    type Output = Ket<N>;
    fn mul(self, rhs: Ket<N>) -> Ket<N> {
        self.apply(&rhs)
    }
}

impl<const N: usize> Add for Op<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Op(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])
        }))
    }
}

impl<const N: usize> Sub for Op<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Op(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] - rhs.0[i][j])
        }))
    }
}

/// Eigendecomposition of a 2×2 Hermitian matrix.
///
/// `values` ascend; `vectors` holds the matching orthonormal eigenvectors as
/// columns, each with its first nonzero component real and positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSystem2 {
    pub values: [f64; 2],
    pub vectors: Op2,
}

impl EigenSystem2 {
    pub fn vector(&self, k: usize) -> Ket2 {
        Ket([self.vectors.0[0][k], self.vectors.0[1][k]])
    }

    /// `V·diag(e^{+iλt})·V†`
    pub fn propagator(&self, t: f64) -> Op2 {
        if t == 0.0 {
            return Op2::identity();
        }
        let phases = self.values.map(|l| C64::from_polar(1.0, l * t));
        let v = &self.vectors.0;
        Op(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..2).map(|k| v[i][k] * phases[k] * v[j][k].conj()).sum())
        }))
    }

    pub fn reconstruct(&self) -> Op2 {
        let v = &self.vectors.0;
        Op(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                (0..2)
                    .map(|k| v[i][k] * self.values[k] * v[j][k].conj())
                    .sum()
            })
        }))
    }
}

/// Closed-form eigendecomposition of a 2×2 Hermitian matrix.
pub fn eig2(h: &Op2) -> Result<EigenSystem2, LinalgError> {
    h.ensure_hermitian()?;
    Ok(eig2_hermitian(h))
}

/// Same as [`eig2`] for a matrix already known to be Hermitian.
pub(crate) fn eig2_hermitian(h: &Op2) -> EigenSystem2 {
    let a = h.0[0][0].re;
    let d = h.0[1][1].re;
    // Symmetrise the coupling so tiny asymmetries cannot leak into the result.
    let b = (h.0[0][1] + h.0[1][0].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let radius = half_gap.hypot(b.norm());

    if radius == 0.0 {
        return EigenSystem2 {
            values: [mean, mean],
            vectors: Op2::identity(),
        };
    }

    // Pick, for each eigenvalue, the null-vector formula whose leading
    // entry is |half_gap| + radius so nothing cancels.
    let big = C64::new(half_gap.abs() + radius, 0.0);
    let (lower, upper) = if half_gap >= 0.0 {
        (Ket([-b, big]), Ket([big, b.conj()]))
    } else {
        (Ket([big, -b.conj()]), Ket([b, big]))
    };
    let lower = fix_phase(lower.scale(C64::new(1.0 / lower.norm(), 0.0)));
    let upper = fix_phase(upper.scale(C64::new(1.0 / upper.norm(), 0.0)));

    EigenSystem2 {
        values: [mean - radius, mean + radius],
        vectors: Op([[lower.0[0], upper.0[0]], [lower.0[1], upper.0[1]]]),
    }
}

fn fix_phase(v: Ket2) -> Ket2 {
    let lead = v.0.iter().copied().find(|c| c.norm() > PHASE_FLOOR);
    match lead {
        Some(c) => v.scale(c.conj() / c.norm()),
        None => v,
    }
}

/// Unitary `exp(+iHt)` for a 2×2 Hermitian `H`.
pub fn propagator(h: &Op2, t: f64) -> Result<Op2, LinalgError> {
    Ok(eig2(h)?.propagator(t))
}

/// Kronecker product in molecule-A-major order.
pub fn kron(a: &Op2, b: &Op2) -> Op4 {
    Op(std::array::from_fn(|i| {
        std::array::from_fn(|j| a.0[i / 2][j / 2] * b.0[i % 2][j % 2])
    }))
}

pub fn kron_ket(a: &Ket2, b: &Ket2) -> Ket4 {
    Ket(std::array::from_fn(|i| a.0[i / 2] * b.0[i % 2]))
}

/// Pure-state density matrix `ρᵢⱼ = cᵢ·conj(cⱼ)`.
pub fn outer<const N: usize>(psi: &Ket<N>) -> Result<Op<N>, LinalgError> {
    psi.ensure_normalised()?;
    Ok(outer_unchecked(psi))
}

pub(crate) fn outer_unchecked<const N: usize>(psi: &Ket<N>) -> Op<N> {
    Op(std::array::from_fn(|i| {
        std::array::from_fn(|j| psi.0[i] * psi.0[j].conj())
    }))
}

/// Reduced density matrix of molecule `keep`, tracing out the partner.
pub fn partial_trace(rho: &Op4, keep: MoleculeId) -> Op2 {
    let r = &rho.0;
    let entry = |i: usize, j: usize| -> C64 {
        match keep {
            MoleculeId::A => r[2 * i][2 * j] + r[2 * i + 1][2 * j + 1],
            MoleculeId::B => r[i][j] + r[i + 2][j + 2],
        }
    };
    Op([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]])
}

/// Scales `psi` to unit norm, reporting the original norm.
pub fn normalise<const N: usize>(psi: &Ket<N>) -> Result<(Ket<N>, f64), LinalgError> {
    let norm = psi.norm();
    if !norm.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if norm == 0.0 {
        return Err(LinalgError::ZeroVector);
    }
    Ok((psi.scale(C64::new(1.0 / norm, 0.0)), norm))
}
