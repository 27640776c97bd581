//! Two molecules A and B sharing one pure joint state.

use serde::{Deserialize, Serialize};

use crate::molecule::{free_propagator, Frequencies, Side};
use crate::smallmat::{kron, kron_ket, outer_unchecked, partial_trace, Ket2, Ket4, Op2, Op4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MoleculeId {
    A,
    B,
}

impl MoleculeId {
    pub fn partner(self) -> MoleculeId {
        match self {
            MoleculeId::A => MoleculeId::B,
            MoleculeId::B => MoleculeId::A,
        }
    }
}

/// Side of molecule `m` in joint basis state `index` (`|LL⟩, |LR⟩, |RL⟩, |RR⟩`).
pub fn side_in(index: usize, m: MoleculeId) -> Side {
    let bit = match m {
        MoleculeId::A => index >> 1,
        MoleculeId::B => index & 1,
    };
    if bit == 0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Projects onto the subspace where molecule `m` sits in `side`; identity on the partner.
pub fn project(psi: &Ket4, m: MoleculeId, side: Side) -> Ket4 {
    let mut out = *psi;
    for (i, c) in out.0.iter_mut().enumerate() {
        if side_in(i, m) != side {
            *c = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairState {
    pub psi: Ket4,
    pub time: f64,
}

impl PairState {
    pub fn density_matrix(&self) -> Op4 {
        pair_density_matrix(self)
    }

    pub fn reduced(&self, m: MoleculeId) -> Op2 {
        partial_trace(&self.density_matrix(), m)
    }
}

/// Product state `ψ_A ⊗ ψ_B` at time zero.
pub fn product_state(psi_a: &Ket2, psi_b: &Ket2) -> PairState {
    PairState {
        psi: kron_ket(psi_a, psi_b),
        time: 0.0,
    }
}

/// Free evolution of both molecules for `dt` via `U_A ⊗ U_B`.
pub fn evolve_pair_free(s: &PairState, f_a: &Frequencies, f_b: &Frequencies, dt: f64) -> PairState {
    let u = kron(&free_propagator(f_a, dt), &free_propagator(f_b, dt));
    PairState {
        psi: u.apply(&s.psi),
        time: s.time + dt,
    }
}

pub fn pair_density_matrix(s: &PairState) -> Op4 {
    outer_unchecked(&s.psi)
}

/// `(L, L)` entry of molecule `m`'s reduced density matrix.
pub fn reduced_left_population(s: &PairState, m: MoleculeId) -> f64 {
    let p = s.psi.probabilities();
    let left: f64 = (0..4)
        .filter(|&i| side_in(i, m) == Side::Left)
        .map(|i| p[i])
        .sum();
    left.clamp(0.0, 1.0)
}
