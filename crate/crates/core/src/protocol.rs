//! Collision scheduling and the simulation loop.
//!
//! Randomness comes from a single [`RngStream`] per run. Every pair
//! collision consumes exactly four uniform draws, in this order:
//! side of A, side of B, branch source, interval to the collision. A
//! single-molecule collision consumes two: side, interval. Variant flags
//! never change the number of draws, so runs with and without them stay
//! aligned on the same random sequence.

use num_complex::Complex64 as C64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    classify_well, localisation_score, purity, CollisionLog, RunRecord, Sample, Snapshot,
};
use crate::config::{ConfigError, RunConfig};
use crate::histories::{
    collision_map_pair, collision_map_single, BranchSpec, HistoryError, WeightMode,
};
use crate::molecule::{free_propagator, Side};
use crate::pair::{evolve_pair_free, reduced_left_population, MoleculeId, PairState};
use crate::smallmat::{outer_unchecked, partial_trace, Ket2, Op2};

/// Seeded ChaCha8 stream. Uniform variates take the top 53 bits of each
/// `u64` output, so the sequence is identical on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn side(&mut self) -> Side {
        if self.uniform() < 0.5 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn molecule(&mut self) -> MoleculeId {
        if self.uniform() < 0.5 {
            MoleculeId::A
        } else {
            MoleculeId::B
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_interval_base() -> f64 {
    120.0
}

fn default_interval_jitter() -> f64 {
    20.0
}

/// One block of collisions sharing durations and weighting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub label: String,
    pub n_collisions: usize,
    pub t1: f64,
    pub t2: f64,
    /// When false every collision carries zero durations.
    #[serde(default = "default_true")]
    pub interaction_on: bool,
    /// Overrides the run-wide weight mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<WeightMode>,
    #[serde(default = "default_interval_base")]
    pub interval_base: f64,
    #[serde(default = "default_interval_jitter")]
    pub interval_jitter: f64,
}

impl PhaseSpec {
    pub fn new(label: &str, n_collisions: usize, t1: f64, t2: f64) -> Self {
        PhaseSpec {
            label: label.to_string(),
            n_collisions,
            t1,
            t2,
            interaction_on: true,
            mode: None,
            interval_base: default_interval_base(),
            interval_jitter: default_interval_jitter(),
        }
    }

    /// Durations actually applied by collisions in this phase.
    pub fn effective_durations(&self) -> (f64, f64) {
        if self.interaction_on {
            (self.t1, self.t2)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Sensitivity-study switches applied on top of the drawn events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Variants {
    /// Perturb only the branch-source molecule.
    pub one_molecule_perturbed: bool,
    /// Molecule B is hit on the same side as molecule A.
    pub shared_side: bool,
    /// Every collision hits this side on both molecules.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_side: Option<Side>,
    /// Force probability weights regardless of the configured mode.
    pub probability_weights: bool,
}

/// Run-wide settings that shape every drawn event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionRules {
    pub mode: WeightMode,
    pub variants: Variants,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCollisionEvent {
    pub time: f64,
    pub side_a: Side,
    pub side_b: Side,
    pub branch_source: MoleculeId,
    pub t1: f64,
    pub t2: f64,
    pub mode: WeightMode,
    /// False only for the one-molecule-perturbed variant.
    pub partner_perturbed: bool,
}

impl PairCollisionEvent {
    pub fn span(&self) -> f64 {
        self.t1.max(self.t2)
    }
}

/// `base + u`, `u` uniform on `[−jitter, +jitter)`. One draw.
pub fn next_interval(rng: &mut RngStream, base: f64, jitter: f64) -> f64 {
    base + jitter * (2.0 * rng.uniform() - 1.0)
}

/// Draws the next pair collision, occurring one interval after `t`.
pub fn draw_event(
    rng: &mut RngStream,
    phase: &PhaseSpec,
    t: f64,
    rules: &CollisionRules,
) -> PairCollisionEvent {
    let mut side_a = rng.side();
    let mut side_b = rng.side();
    let branch_source = rng.molecule();
    let interval = next_interval(rng, phase.interval_base, phase.interval_jitter);

    let v = &rules.variants;
    if v.shared_side {
        side_b = side_a;
    }
    if let Some(side) = v.fixed_side {
        side_a = side;
        side_b = side;
    }
    let (t1, t2) = phase.effective_durations();
    PairCollisionEvent {
        time: t + interval,
        side_a,
        side_b,
        branch_source,
        t1,
        t2,
        mode: resolve_mode(phase, rules),
        partner_perturbed: !v.one_molecule_perturbed,
    }
}

fn resolve_mode(phase: &PhaseSpec, rules: &CollisionRules) -> WeightMode {
    if rules.variants.probability_weights {
        WeightMode::Probability
    } else {
        phase.mode.unwrap_or(rules.mode)
    }
}

/// The five collision regimes of the reference experiment:
/// (a) 40 equal ½ durations, (b) 40 with the interaction off,
/// (c) 40 with ⅛ / ⅜, (d) 40 equal ½, (e) 80 with ⅛ / ⅜.
pub fn fig1_protocol() -> Vec<PhaseSpec> {
    let mut off = PhaseSpec::new("b", 40, 0.0, 0.0);
    off.interaction_on = false;
    vec![
        PhaseSpec::new("a", 40, 0.5, 0.5),
        off,
        PhaseSpec::new("c", 40, 0.125, 0.375),
        PhaseSpec::new("d", 40, 0.5, 0.5),
        PhaseSpec::new("e", 80, 0.125, 0.375),
    ]
}

/// A run that stopped because a collision's histories cancelled.
#[derive(Clone, Debug)]
pub struct DegenerateRun {
    /// Everything recorded up to the failing collision.
    pub record: RunRecord,
    pub event: PairCollisionEvent,
    pub phase_label: String,
    pub norm: f64,
    pub state: Vec<C64>,
}

#[derive(Error, Debug)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("degenerate branch superposition in phase {} at t = {} (norm {:.3e})", .0.phase_label, .0.event.time, .0.norm)]
    Degenerate(Box<DegenerateRun>),
    #[error(transparent)]
    History(HistoryError),
}

/// Grid of sample times `k·interval`.
struct SampleClock {
    interval: f64,
    next: u64,
}

impl SampleClock {
    fn time(&self) -> f64 {
        self.next as f64 * self.interval
    }

    /// Skips grid points strictly before `t`.
    fn skip_before(&mut self, t: f64) {
        while self.time() < t {
            self.next += 1;
        }
    }
}

struct PairRun<'a> {
    config: &'a RunConfig,
    state: PairState,
    clock: SampleClock,
    last_contraction: f64,
    record: RunRecord,
}

impl PairRun<'_> {
    fn sample(&mut self, label: &str) {
        let state = &self.state;
        let rho = state.density_matrix();
        self.record.samples.push(Sample {
            time: state.time,
            reduced_left_a: reduced_left_population(state, MoleculeId::A),
            reduced_left_b: reduced_left_population(state, MoleculeId::B),
            localisation_score: localisation_score(&rho),
            purity_a: purity(&partial_trace(&rho, MoleculeId::A)),
            purity_b: purity(&partial_trace(&rho, MoleculeId::B)),
            norm_contraction: self.last_contraction,
            phase_label: label.to_string(),
            psi: state.psi,
        });
    }

    /// Free evolution up to `until`, sampling on every grid point passed.
    fn advance_free(&mut self, until: f64, label: &str) {
        let (fa, fb) = (
            self.config.molecule_a.frequencies(),
            self.config.molecule_b.frequencies(),
        );
        while self.clock.time() <= until {
            let t = self.clock.time();
            if t > self.state.time {
                self.state = evolve_pair_free(&self.state, &fa, &fb, t - self.state.time);
                self.state.time = t;
            }
            if self.record.samples.last().is_none_or(|s| s.time < t) {
                self.sample(label);
            }
            self.clock.next += 1;
        }
        if until > self.state.time {
            self.state = evolve_pair_free(&self.state, &fa, &fb, until - self.state.time);
            self.state.time = until;
        }
    }
}

/// Runs the configured phases on the pair and records observables.
pub fn run_simulation(config: &RunConfig) -> Result<RunRecord, RunError> {
    config.validate()?;
    let (fa, fb) = (
        config.molecule_a.frequencies(),
        config.molecule_b.frequencies(),
    );
    let rules = CollisionRules {
        mode: config.mode,
        variants: config.variants,
    };
    let mut rng = RngStream::new(config.seed);
    let initial = config.initial_pair_state()?;
    let mut run = PairRun {
        config,
        state: initial,
        clock: SampleClock {
            interval: config.sample_interval,
            next: 0,
        },
        last_contraction: 1.0,
        record: RunRecord::empty(config.clone(), initial),
    };
    let first_label = config
        .phases
        .first()
        .map_or("initial", |p| p.label.as_str());
    run.sample(first_label);
    run.clock.next = 1;

    for (index, phase) in config.phases.iter().enumerate() {
        for _ in 0..phase.n_collisions {
            let event = draw_event(&mut rng, phase, run.state.time, &rules);
            run.advance_free(event.time, &phase.label);
            match collision_map_pair(&run.state.psi, &fa, &fb, &event) {
                Ok((psi, contraction)) => {
                    run.state = PairState {
                        psi,
                        time: event.time + event.span(),
                    };
                    run.last_contraction = contraction;
                }
                Err(HistoryError::Degenerate { norm, input }) => {
                    run.record.finish(run.state);
                    return Err(RunError::Degenerate(Box::new(DegenerateRun {
                        record: run.record,
                        event,
                        phase_label: phase.label.clone(),
                        norm,
                        state: input,
                    })));
                }
                Err(e) => return Err(RunError::History(e)),
            }
            run.clock.skip_before(run.state.time);
            let state = &run.state;
            run.record.collisions.push(CollisionLog {
                time: event.time,
                phase_index: index,
                side_a: event.side_a,
                side_b: event.side_b,
                branch_source: event.branch_source,
                localisation_score: localisation_score(&state.density_matrix()),
                reduced_left_a: reduced_left_population(state, MoleculeId::A),
                reduced_left_b: reduced_left_population(state, MoleculeId::B),
                norm_contraction: run.last_contraction,
                norm_after: state.psi.norm(),
            });
        }
        run.record.snapshots.push(Snapshot {
            label: phase.label.clone(),
            time: run.state.time,
            density: run.state.density_matrix(),
        });
    }
    run.record.finish(run.state);
    Ok(run.record)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleSample {
    pub time: f64,
    pub psi: Ket2,
    pub norm_contraction: f64,
}

impl SingleSample {
    pub fn density(&self) -> Op2 {
        outer_unchecked(&self.psi)
    }
}

/// Time series of a one-molecule run.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleRunRecord {
    pub samples: Vec<SingleSample>,
    pub final_psi: Ket2,
    pub final_time: f64,
}

/// One molecule (`molecule_a` of the config) under the configured phases.
pub fn run_single_simulation(config: &RunConfig) -> Result<SingleRunRecord, RunError> {
    config.validate()?;
    let f = config.molecule_a.frequencies();
    let rules = CollisionRules {
        mode: config.mode,
        variants: config.variants,
    };
    let mut rng = RngStream::new(config.seed);
    let mut psi = config.molecule_a.initial_spatial()?;
    let mut time = 0.0;
    let mut contraction = 1.0;
    let mut clock = SampleClock {
        interval: config.sample_interval,
        next: 1,
    };
    let mut samples = vec![SingleSample {
        time,
        psi,
        norm_contraction: contraction,
    }];

    for phase in &config.phases {
        for _ in 0..phase.n_collisions {
            let mut side = rng.side();
            let interval = next_interval(&mut rng, phase.interval_base, phase.interval_jitter);
            if let Some(fixed) = rules.variants.fixed_side {
                side = fixed;
            }
            let at = time + interval;
            while clock.time() <= at {
                let t = clock.time();
                psi = free_propagator(&f, t - time).apply(&psi);
                time = t;
                samples.push(SingleSample {
                    time,
                    psi,
                    norm_contraction: contraction,
                });
                clock.next += 1;
            }
            psi = free_propagator(&f, at - time).apply(&psi);
            let (t1, t2) = phase.effective_durations();
            let spec = BranchSpec {
                side,
                t1,
                t2,
                mode: resolve_mode(phase, &rules),
            };
            let (next, c) = collision_map_single(&psi, &f, &spec).map_err(RunError::History)?;
            psi = next;
            contraction = c;
            time = at + t1.max(t2);
            clock.skip_before(time);
        }
    }
    Ok(SingleRunRecord {
        samples,
        final_psi: psi,
        final_time: time,
    })
}

/// Classifies both molecules' terminal wells.
pub fn terminal_wells(state: &PairState) -> [crate::analysis::TerminalWell; 2] {
    [
        classify_well(reduced_left_population(state, MoleculeId::A)),
        classify_well(reduced_left_population(state, MoleculeId::B)),
    ]
}
