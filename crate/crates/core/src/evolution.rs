//! Split-operator time loop and measurement sampling.
//!
//! One first-order step applies `exp(-iUε)` and then the kinetic factor of
//! every enabled register. The symmetric (Strang) step applies `exp(-iUε/2)`,
//! the kinetic factors, and `exp(-iUε/2)` again; with the block-product
//! kinetic method the kinetic factor itself is then symmetrized as well
//! (ascending pass at `ξ/2`, descending pass at `ξ/2`) so the step as a whole
//! is second order.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, IndexCodec, ParticleSpec, Species, StateVector};
use crate::kinetic::{KineticPlan, KineticTrotterPlan, SpectralKineticPlan};
use crate::potential::{
    build_coulomb_diagonal, wall_potential_joint, CoulombTerm, DiagonalOperator,
};

/// Abort threshold for `|norm - 1|` during [`evolve`].
pub const NORM_DRIFT_ABORT: f64 = 1e-6;

/// Default number of evenly spaced density snapshots.
pub const DEFAULT_SNAPSHOTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KineticMethod {
    /// Position-space block product.
    Trotter,
    /// QFT, diagonal momentum phase, inverse QFT.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Splitting {
    FirstOrder,
    Strang,
}

/// Hamiltonian terms included in the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TermSet {
    pub electron_kinetic: bool,
    pub nuclear_kinetic: bool,
    pub electron_electron: bool,
    pub electron_nucleus: bool,
    pub nucleus_nucleus: bool,
    pub wall: bool,
}

impl TermSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Free particle in a box with walls.
    pub fn particle_in_box() -> Self {
        TermSet {
            electron_kinetic: true,
            wall: true,
            ..Self::default()
        }
    }

    /// Clamped-nucleus molecule: electron kinetic energy, e-e and e-n Coulomb.
    pub fn clamped_molecule() -> Self {
        TermSet {
            electron_kinetic: true,
            electron_electron: true,
            electron_nucleus: true,
            ..Self::default()
        }
    }

    pub fn free() -> Self {
        TermSet {
            electron_kinetic: true,
            nuclear_kinetic: true,
            ..Self::default()
        }
    }

    fn has_potential(&self) -> bool {
        self.electron_electron || self.electron_nucleus || self.nucleus_nucleus || self.wall
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionPlan {
    pub total_time: f64,
    pub steps: usize,
    pub kinetic: KineticMethod,
    pub terms: TermSet,
    pub splitting: Splitting,
    /// Number of evenly spaced density snapshots to record.
    pub snapshots: usize,
}

impl EvolutionPlan {
    pub fn new(total_time: f64, steps: usize) -> Result<Self> {
        let plan = EvolutionPlan {
            total_time,
            steps,
            kinetic: KineticMethod::Spectral,
            terms: TermSet::particle_in_box(),
            splitting: Splitting::FirstOrder,
            snapshots: DEFAULT_SNAPSHOTS,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_kinetic(mut self, kinetic: KineticMethod) -> Self {
        self.kinetic = kinetic;
        self
    }

    pub fn with_terms(mut self, terms: TermSet) -> Self {
        self.terms = terms;
        self
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    pub fn with_snapshots(mut self, snapshots: usize) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("step count must be at least 1"));
        }
        if !(self.total_time.is_finite() && self.total_time >= 0.0) {
            return Err(Error::invalid(format!(
                "total time must be non-negative, got {}",
                self.total_time
            )));
        }
        Ok(())
    }

    /// `ε = T / N_t`.
    pub fn time_step(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    /// Steps after which a snapshot is recorded, ascending and distinct.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let count = self.snapshots.min(self.steps);
        let mut out: Vec<usize> = (1..=count)
            .map(|k| ((k as u128 * self.steps as u128) / count as u128) as usize)
            .collect();
        out.dedup();
        out
    }
}

/// Potential phases and kinetic plans prepared for one plan and system.
#[derive(Debug, Clone)]
pub struct PreparedOperators {
    dim: usize,
    potential: Option<DiagonalOperator>,
    potential_phase: Vec<Complex64>,
    kinetic_plans: Vec<KineticPlan>,
    /// `(register, index into kinetic_plans)` in application order.
    kinetic_registers: Vec<(usize, usize)>,
    splitting: Splitting,
}

impl PreparedOperators {
    /// `particles` may include clamped particles; quantum ones are assigned
    /// registers in order of appearance.
    pub fn new(
        grid: &GridSpec,
        particles: &[ParticleSpec],
        plan: &EvolutionPlan,
        wall_height: f64,
    ) -> Result<Self> {
        plan.validate()?;
        let quantum: Vec<&ParticleSpec> = particles.iter().filter(|p| p.is_quantum()).collect();
        if quantum.is_empty() {
            return Err(Error::invalid(
                "evolution needs at least one quantum particle",
            ));
        }
        grid.check_capacity(quantum.len())?;
        let dim = IndexCodec::for_grid(grid, quantum.len()).dim();
        let potential = Self::potential(
            grid,
            particles,
            quantum.len(),
            dim,
            &plan.terms,
            wall_height,
        )?;

        let eps = plan.time_step();
        let potential_eps = match plan.splitting {
            Splitting::FirstOrder => eps,
            Splitting::Strang => eps / 2.0,
        };
        let potential_phase = potential
            .as_ref()
            .map(|d| {
                d.energies
                    .iter()
                    .map(|e| Complex64::from_polar(1.0, -potential_eps * e))
                    .collect()
            })
            .unwrap_or_default();

        let mut kinetic_plans: Vec<(f64, KineticPlan)> = Vec::new();
        let mut kinetic_registers = Vec::new();
        let len = grid.cells_per_axis();
        let delta = grid.cell_width();
        for (slot, p) in quantum.iter().enumerate() {
            let enabled = match p.species {
                Species::Electron => plan.terms.electron_kinetic,
                Species::Nucleus => plan.terms.nuclear_kinetic,
            };
            if !enabled {
                continue;
            }
            let idx = match kinetic_plans.iter().position(|(m, _)| *m == p.mass) {
                Some(i) => i,
                None => {
                    let k = match (plan.kinetic, plan.splitting) {
                        (KineticMethod::Spectral, _) => KineticPlan::Spectral(
                            SpectralKineticPlan::new(len, delta, p.mass, eps)?,
                        ),
                        (KineticMethod::Trotter, Splitting::FirstOrder) => {
                            KineticPlan::Trotter(KineticTrotterPlan::new(len, delta, p.mass, eps)?)
                        }
                        (KineticMethod::Trotter, Splitting::Strang) => KineticPlan::Trotter(
                            KineticTrotterPlan::symmetric(len, delta, p.mass, eps)?,
                        ),
                    };
                    kinetic_plans.push((p.mass, k));
                    kinetic_plans.len() - 1
                }
            };
            for axis in 0..grid.dims() {
                kinetic_registers.push((slot * grid.dims() + axis, idx));
            }
        }

        Ok(PreparedOperators {
            dim,
            potential,
            potential_phase,
            kinetic_plans: kinetic_plans.into_iter().map(|(_, k)| k).collect(),
            kinetic_registers,
            splitting: plan.splitting,
        })
    }

    fn potential(
        grid: &GridSpec,
        particles: &[ParticleSpec],
        quantum: usize,
        dim: usize,
        terms: &TermSet,
        wall_height: f64,
    ) -> Result<Option<DiagonalOperator>> {
        if !terms.has_potential() {
            return Ok(None);
        }
        let mut total: Option<DiagonalOperator> = None;
        let mut push = |d: DiagonalOperator| -> Result<()> {
            // a diagonal built from clamped particles only is a single constant
            let d = if d.len() == 1 {
                DiagonalOperator::new(vec![d.energies[0]; dim], d.label)
            } else {
                d
            };
            total = Some(match total.take() {
                None => d,
                Some(t) => t.add(&d)?,
            });
            Ok(())
        };
        for (on, term) in [
            (terms.electron_electron, CoulombTerm::ElectronElectron),
            (terms.electron_nucleus, CoulombTerm::ElectronNucleus),
            (terms.nucleus_nucleus, CoulombTerm::NucleusNucleus),
        ] {
            if on {
                push(build_coulomb_diagonal(grid, particles, term)?)?;
            }
        }
        if terms.wall {
            push(wall_potential_joint(grid, quantum, wall_height)?)?;
        }
        Ok(total)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Combined potential diagonal, if any potential term is enabled.
    pub fn potential_diagonal(&self) -> Option<&DiagonalOperator> {
        self.potential.as_ref()
    }

    fn apply_potential(&self, state: &mut StateVector) {
        if self.potential_phase.is_empty() {
            return;
        }
        let amps = state.amplitudes_mut();
        if amps.len() >= 1 << 14 {
            amps.par_iter_mut()
                .zip(self.potential_phase.par_iter())
                .for_each(|(a, p)| *a *= p);
        } else {
            amps.iter_mut()
                .zip(&self.potential_phase)
                .for_each(|(a, p)| *a *= p);
        }
    }

    fn apply_kinetic(&self, state: &mut StateVector) -> Result<()> {
        for &(register, idx) in &self.kinetic_registers {
            self.kinetic_plans[idx].apply(state, register)?;
        }
        Ok(())
    }
}

/// Advance `state` by one step of `plan`.
pub fn step(state: &mut StateVector, ops: &PreparedOperators) -> Result<()> {
    if state.dim() != ops.dim {
        return Err(Error::DimensionMismatch {
            expected: ops.dim,
            actual: state.dim(),
        });
    }
    match ops.splitting {
        Splitting::FirstOrder => {
            ops.apply_potential(state);
            ops.apply_kinetic(state)?;
        }
        Splitting::Strang => {
            ops.apply_potential(state);
            ops.apply_kinetic(state)?;
            ops.apply_potential(state);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionReport {
    /// `|norm - 1|` after each step.
    pub norm_drift: Vec<f64>,
    pub final_state: StateVector,
    pub snapshots: Vec<Snapshot>,
}

impl EvolutionReport {
    pub fn max_norm_drift(&self) -> f64 {
        self.norm_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// Run `plan.steps` steps, recording norm drift and density snapshots.
pub fn evolve(
    mut state: StateVector,
    plan: &EvolutionPlan,
    ops: &PreparedOperators,
) -> Result<EvolutionReport> {
    plan.validate()?;
    let eps = plan.time_step();
    let snapshot_steps = plan.snapshot_steps();
    let mut next_snapshot = snapshot_steps.iter().peekable();
    let mut norm_drift = Vec::with_capacity(plan.steps);
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    for k in 1..=plan.steps {
        step(&mut state, ops)?;
        let drift = (state.norm() - 1.0).abs();
        norm_drift.push(drift);
        if drift > NORM_DRIFT_ABORT || !drift.is_finite() {
            return Err(Error::NormDrift { step: k, drift });
        }
        if next_snapshot.peek() == Some(&&k) {
            next_snapshot.next();
            snapshots.push(Snapshot {
                step: k,
                time: eps * k as f64,
                density: state.density(),
            });
        }
    }
    Ok(EvolutionReport {
        norm_drift,
        final_state: state,
        snapshots,
    })
}

/// Counts of measured joint configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub shots: u64,
    /// Nonzero counts keyed by flat configuration index.
    pub counts: BTreeMap<usize, u64>,
}

impl Histogram {
    /// Total-variation distance `½ Σ |count/shots - p|` to a distribution.
    pub fn tv_distance(&self, density: &[f64]) -> f64 {
        let shots = self.shots as f64;
        let mut sum = 0.0;
        for (m, &p) in density.iter().enumerate() {
            let f = self.counts.get(&m).copied().unwrap_or(0) as f64 / shots;
            sum += (f - p).abs();
        }
        // counts outside the density support
        sum += self
            .counts
            .iter()
            .filter(|(m, _)| **m >= density.len())
            .map(|(_, c)| *c as f64 / shots)
            .sum::<f64>();
        0.5 * sum
    }
}

const SHOT_BATCH: u64 = 1 << 16;

/// Draw `shots` independent position measurements of the full register.
///
/// Batch `b` of up to 65536 shots uses ChaCha8 stream `b` of `seed`, so the
/// result does not depend on how batches are scheduled.
pub fn sample_configurations(state: &StateVector, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::invalid("at least one shot is required"));
    }
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let last_nonzero = state
        .amplitudes()
        .iter()
        .rposition(|a| a.norm_sqr() > 0.0)
        .unwrap_or(0);
    let batches = shots.div_ceil(SHOT_BATCH);
    let partial: Vec<BTreeMap<usize, u64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = SHOT_BATCH.min(shots - b * SHOT_BATCH);
            let mut counts = BTreeMap::new();
            for _ in 0..n {
                let u = rng.random::<f64>() * acc;
                let m = cdf.partition_point(|&c| c <= u).min(last_nonzero);
                *counts.entry(m).or_insert(0) += 1;
            }
            counts
        })
        .collect();
    let mut counts = BTreeMap::new();
    for part in partial {
        for (m, c) in part {
            *counts.entry(m).or_insert(0) += c;
        }
    }
    Ok(Histogram { shots, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, encode_state};
    use crate::kinetic::{apply_kinetic_spectral, apply_kinetic_trotter};
    use crate::potential::apply_diagonal_phase;
    use nalgebra::DMatrix;

    fn electron() -> Vec<ParticleSpec> {
        vec![ParticleSpec::electron()]
    }

    fn packet(grid: &GridSpec) -> StateVector {
        encode_state(grid, &electron(), |x| {
            Complex64::from_polar((-(x[0] - 0.45).powi(2) / 0.02).exp(), 4.0 * x[0])
        })
        .unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(EvolutionPlan::new(1.0, 0).is_err());
        assert!(EvolutionPlan::new(-1.0, 10).is_err());
        let p = EvolutionPlan::new(1e-3, 1000).unwrap();
        assert!((p.time_step() * 1000.0 - 1e-3).abs() < 1e-12);
        assert_eq!(
            p.snapshot_steps(),
            (1..=10).map(|k| 100 * k).collect::<Vec<_>>()
        );
        assert_eq!(
            p.clone().with_snapshots(0).snapshot_steps(),
            Vec::<usize>::new()
        );
        let short = EvolutionPlan::new(1.0, 3).unwrap();
        assert_eq!(short.snapshot_steps(), vec![1, 2, 3]);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let g = build_grid(1.0, 4, 1).unwrap();
        let plan = EvolutionPlan::new(0.5, 7)
            .unwrap()
            .with_terms(TermSet::empty());
        let ops = PreparedOperators::new(&g, &electron(), &plan, 1e6).unwrap();
        let s0 = packet(&g);
        let mut s = s0.clone();
        step(&mut s, &ops).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn free_momentum_eigenstate_gets_global_phase() {
        let g = build_grid(1.0, 5, 1).unwrap();
        let mut s = encode_state(&g, &electron(), |x| {
            Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * 5.0 * (x[0] / g.cell_width() - 0.5) / 32.0,
            )
        })
        .unwrap();
        let rho = s.density();
        let plan = EvolutionPlan::new(0.01, 1)
            .unwrap()
            .with_terms(TermSet::free());
        let ops = PreparedOperators::new(&g, &electron(), &plan, 1e6).unwrap();
        step(&mut s, &ops).unwrap();
        for (a, b) in s.density().iter().zip(&rho) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_step_matches_dense_product() {
        let g = build_grid(1.0, 4, 1).unwrap();
        let dim = 16;
        let eps = 1e-3;
        let plan = EvolutionPlan::new(eps, 1)
            .unwrap()
            .with_kinetic(KineticMethod::Trotter);
        let ops = PreparedOperators::new(&g, &electron(), &plan, 50.0).unwrap();
        // dense: columns of (K ∘ U) from the independently applied factors
        let mut dense = DMatrix::<Complex64>::zeros(dim, dim);
        let wall = wall_potential_joint(&g, 1, 50.0).unwrap();
        for col in 0..dim {
            let mut s = StateVector::basis(g, electron(), col).unwrap();
            apply_diagonal_phase(&mut s, &wall, eps).unwrap();
            apply_kinetic_trotter(&mut s, 0, 0, 1.0, eps).unwrap();
            for row in 0..dim {
                dense[(row, col)] = s.amplitudes()[row];
            }
        }
        let s0 = packet(&g);
        let expect = &dense * nalgebra::DVector::from_column_slice(s0.amplitudes());
        let mut s = s0.clone();
        step(&mut s, &ops).unwrap();
        for (a, b) in s.amplitudes().iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn strang_step_is_symmetric_sandwich() {
        let g = build_grid(1.0, 4, 1).unwrap();
        let eps = 2e-3;
        let plan = EvolutionPlan::new(eps, 1)
            .unwrap()
            .with_splitting(Splitting::Strang)
            .with_kinetic(KineticMethod::Spectral);
        let ops = PreparedOperators::new(&g, &electron(), &plan, 30.0).unwrap();
        let wall = wall_potential_joint(&g, 1, 30.0).unwrap();
        let mut expect = packet(&g);
        apply_diagonal_phase(&mut expect, &wall, eps / 2.0).unwrap();
        apply_kinetic_spectral(&mut expect, 0, 0, 1.0, eps).unwrap();
        apply_diagonal_phase(&mut expect, &wall, eps / 2.0).unwrap();
        let mut s = packet(&g);
        step(&mut s, &ops).unwrap();
        assert!(s.distance(&expect).unwrap() < 1e-13);
    }

    #[test]
    fn evolve_single_step_equals_step_and_is_deterministic() {
        let g = build_grid(1.0, 6, 1).unwrap();
        let plan = EvolutionPlan::new(1e-4, 1).unwrap();
        let ops = PreparedOperators::new(&g, &electron(), &plan, 1e6).unwrap();
        let mut s = packet(&g);
        step(&mut s, &ops).unwrap();
        let r = evolve(packet(&g), &plan, &ops).unwrap();
        assert_eq!(r.final_state, s);
        assert_eq!(r.snapshots.len(), 1);

        let plan = EvolutionPlan::new(1e-3, 200).unwrap();
        let ops = PreparedOperators::new(&g, &electron(), &plan, 1e6).unwrap();
        let a = evolve(packet(&g), &plan, &ops).unwrap();
        let b = evolve(packet(&g), &plan, &ops).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 10);
        assert_eq!(a.snapshots[9].step, 200);
        assert!(a.max_norm_drift() < 1e-10);
    }

    #[test]
    fn rejects_mismatched_state() {
        let g = build_grid(1.0, 4, 1).unwrap();
        let plan = EvolutionPlan::new(1e-3, 1).unwrap();
        let ops = PreparedOperators::new(&g, &electron(), &plan, 1e6).unwrap();
        let other = build_grid(1.0, 5, 1).unwrap();
        let mut s = packet(&other);
        assert!(matches!(
            step(&mut s, &ops),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PreparedOperators::new(
            &g,
            &[ParticleSpec::proton().clamped_at(vec![3])],
            &plan,
            1e6
        )
        .is_err());
    }

    #[test]
    fn clamped_only_nuclear_repulsion_is_constant() {
        let g = build_grid(4.0, 3, 2).unwrap();
        let ps = vec![
            ParticleSpec::electron(),
            ParticleSpec::proton().clamped_at(vec![2, 4]),
            ParticleSpec::proton().clamped_at(vec![6, 4]),
        ];
        let plan = EvolutionPlan::new(1.0, 10).unwrap().with_terms(TermSet {
            nucleus_nucleus: true,
            ..TermSet::empty()
        });
        let ops = PreparedOperators::new(&g, &ps, &plan, 1e6).unwrap();
        let d = ops.potential_diagonal().unwrap();
        assert_eq!(d.len(), 64);
        assert!(d.energies.iter().all(|&e| (e - 0.5).abs() < 1e-14));
    }

    #[test]
    fn sampling_point_mass_and_uniform() {
        let g = build_grid(1.0, 2, 1).unwrap();
        let point = StateVector::basis(g, electron(), 2).unwrap();
        let h = sample_configurations(&point, 1000, 1).unwrap();
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&2], 1000);

        let uniform = encode_state(&g, &electron(), |_| Complex64::new(1.0, 0.0)).unwrap();
        let shots = 100_000u64;
        let h = sample_configurations(&uniform, shots, 42).unwrap();
        assert_eq!(h.counts.values().sum::<u64>(), shots);
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        for m in 0..4 {
            assert!(
                (h.counts[&m] as f64 - 25_000.0).abs() < 5.0 * sigma,
                "{:?}",
                h.counts
            );
        }
        assert_eq!(h, sample_configurations(&uniform, shots, 42).unwrap());
        assert_ne!(h, sample_configurations(&uniform, shots, 43).unwrap());
        assert!(sample_configurations(&uniform, 0, 1).is_err());
    }

    #[test]
    fn sampling_tv_distance_on_64_states() {
        let g = build_grid(1.0, 6, 1).unwrap();
        let s = packet(&g);
        let h = sample_configurations(&s, 100_000, 9).unwrap();
        assert!(h.tv_distance(&s.density()) < 0.05);
    }
}
