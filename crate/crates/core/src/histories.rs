//! Collisions as superpositions of two histories.
//!
//! A collision raises the energy of one well by `ωₚ`. The state is evolved
//! along two histories: one where the perturbation lasts `t1` (the particle
//! occupies the perturbed well) and one where it lasts `t2` (the perturbed
//! well is empty). Both histories are aligned at `T = max(t1, t2)` by
//! appending free evolution, superposed with weights taken from the
//! pre-collision occupation, and renormalised.
//!
//! Weights are scaled to sum to one before superposing, so `contraction`
//! (the norm of the superposition before renormalisation) is exactly 1
//! whenever the two histories coincide.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molecule::{free_propagator, perturbed_propagator, Frequencies, Side};
use crate::pair::{project, MoleculeId};
use crate::protocol::PairCollisionEvent;
use crate::smallmat::{kron, Ket, Ket2, Ket4, Op2};

/// Superpositions (or weight sums) below this norm are treated as vanished.
pub const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Histories weighted by the occupation amplitudes.
    Amplitude,
    /// Histories weighted by the occupation probabilities.
    Probability,
    /// Each history acts only on its own projected component, with unit weight.
    ProjectedBranch,
}

impl WeightMode {
    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Amplitude => "amplitude",
            WeightMode::Probability => "probability",
            WeightMode::ProjectedBranch => "projected_branch",
        }
    }

    pub fn parse(s: &str) -> Option<WeightMode> {
        match s {
            "amplitude" => Some(WeightMode::Amplitude),
            "probability" => Some(WeightMode::Probability),
            "projected_branch" | "projected" => Some(WeightMode::ProjectedBranch),
            _ => None,
        }
    }
}

/// One single-molecule collision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchSpec {
    pub side: Side,
    /// Perturbation duration when the perturbed well is occupied.
    pub t1: f64,
    /// Perturbation duration when the perturbed well is empty.
    pub t2: f64,
    pub mode: WeightMode,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HistoryError {
    #[error("invalid branch durations t1 = {t1}, t2 = {t2}")]
    InvalidDuration { t1: f64, t2: f64 },
    #[error("history superposition vanished (norm {norm:.3e})")]
    Degenerate {
        norm: f64,
        /// State the collision was applied to.
        input: Vec<C64>,
    },
}

fn check_durations(t1: f64, t2: f64) -> Result<(), HistoryError> {
    if !(t1.is_finite() && t2.is_finite() && t1 >= 0.0 && t2 >= 0.0) {
        return Err(HistoryError::InvalidDuration { t1, t2 });
    }
    Ok(())
}

/// Perturbed for `t` then free until `span`.
fn history_operator(f: &Frequencies, side: Option<Side>, t: f64, span: f64) -> Op2 {
    let kick = match side {
        Some(s) => perturbed_propagator(f, s, t),
        None => free_propagator(f, t),
    };
    free_propagator(f, span - t) * kick
}

fn superpose<const N: usize>(
    input: &Ket<N>,
    first: Ket<N>,
    second: Ket<N>,
    weights: (C64, C64),
) -> Result<(Ket<N>, f64), HistoryError> {
    let degenerate = |norm: f64| HistoryError::Degenerate {
        norm,
        input: input.0.to_vec(),
    };
    let sum = weights.0 + weights.1;
    if sum.norm() < DEGENERATE_TOL {
        return Err(degenerate(sum.norm()));
    }
    let raw = (weights.0 / sum) * first + (weights.1 / sum) * second;
    finish(input, raw).map_err(|_| degenerate(raw.norm()))
}

fn finish<const N: usize>(input: &Ket<N>, raw: Ket<N>) -> Result<(Ket<N>, f64), HistoryError> {
    let norm = raw.norm();
    if !norm.is_finite() || norm < DEGENERATE_TOL {
        return Err(HistoryError::Degenerate {
            norm,
            input: input.0.to_vec(),
        });
    }
    Ok((raw.scale(C64::new(1.0 / norm, 0.0)), norm))
}

/// Applies one two-history collision to a single molecule.
///
/// Returns the renormalised state and the contraction.
pub fn collision_map_single(
    psi: &Ket2,
    f: &Frequencies,
    spec: &BranchSpec,
) -> Result<(Ket2, f64), HistoryError> {
    check_durations(spec.t1, spec.t2)?;
    let span = spec.t1.max(spec.t2);
    let occupied = history_operator(f, Some(spec.side), spec.t1, span);
    if spec.t1 == spec.t2 {
        return finish(psi, occupied.apply(psi));
    }
    let empty = history_operator(f, Some(spec.side), spec.t2, span);

    let occ = spec.side.index();
    let unocc = spec.side.other().index();
    match spec.mode {
        WeightMode::Amplitude => superpose(
            psi,
            occupied.apply(psi),
            empty.apply(psi),
            (psi.0[occ], psi.0[unocc]),
        ),
        WeightMode::Probability => superpose(
            psi,
            occupied.apply(psi),
            empty.apply(psi),
            (
                C64::new(psi.0[occ].norm_sqr(), 0.0),
                C64::new(psi.0[unocc].norm_sqr(), 0.0),
            ),
        ),
        WeightMode::ProjectedBranch => {
            let mut on = Ket2::zero();
            on.0[occ] = psi.0[occ];
            let mut off = Ket2::zero();
            off.0[unocc] = psi.0[unocc];
            finish(psi, occupied.apply(&on) + empty.apply(&off))
        }
    }
}

/// Applies one two-history collision to the pair.
///
/// In each history both molecules are perturbed on their own drawn side for
/// the same duration (only the branch source when
/// `event.partner_perturbed` is false). Weights come from the branch
/// source's occupation of its perturbed side in the joint state.
pub fn collision_map_pair(
    psi: &Ket4,
    f_a: &Frequencies,
    f_b: &Frequencies,
    event: &PairCollisionEvent,
) -> Result<(Ket4, f64), HistoryError> {
    check_durations(event.t1, event.t2)?;
    let span = event.t1.max(event.t2);
    let source = event.branch_source;
    let perturbed = |m: MoleculeId| event.partner_perturbed || m == source;
    let side_a = perturbed(MoleculeId::A).then_some(event.side_a);
    let side_b = perturbed(MoleculeId::B).then_some(event.side_b);
    let history = |t: f64| {
        kron(
            &history_operator(f_a, side_a, t, span),
            &history_operator(f_b, side_b, t, span),
        )
    };

    let occupied = history(event.t1);
    if event.t1 == event.t2 {
        return finish(psi, occupied.apply(psi));
    }
    let empty = history(event.t2);

    let source_side = match source {
        MoleculeId::A => event.side_a,
        MoleculeId::B => event.side_b,
    };
    let on = project(psi, source, source_side);
    let off = project(psi, source, source_side.other());
    match event.mode {
        WeightMode::Amplitude => superpose(
            psi,
            occupied.apply(psi),
            empty.apply(psi),
            (C64::new(on.norm(), 0.0), C64::new(off.norm(), 0.0)),
        ),
        WeightMode::Probability => superpose(
            psi,
            occupied.apply(psi),
            empty.apply(psi),
            (C64::new(on.norm_sqr(), 0.0), C64::new(off.norm_sqr(), 0.0)),
        ),
        WeightMode::ProjectedBranch => finish(psi, occupied.apply(&on) + empty.apply(&off)),
    }
}
