//! Diagonal potential-energy operators in the joint position basis.
//!
//! Energies are in hartree with `e' = e²/4πε₀ = 1`. Two particles sharing a
//! cell interact through `e' q_p q_q / δ` in place of the singular term.

use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, IndexCodec, ParticleSpec, Species, StateVector};

/// Default wall height for box problems (hartree).
pub const DEFAULT_WALL_HEIGHT: f64 = 1e6;

/// Largest joint dimension a diagonal may be built for.
pub const MAX_DIAGONAL_DIM: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermLabel {
    ElectronElectron,
    ElectronNucleus,
    NucleusNucleus,
    Wall,
    Composite,
}

/// Which pairs a Coulomb diagonal sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoulombTerm {
    ElectronElectron,
    ElectronNucleus,
    NucleusNucleus,
    All,
}

impl CoulombTerm {
    fn selects(self, a: Species, b: Species) -> bool {
        use Species::*;
        match self {
            CoulombTerm::All => true,
            CoulombTerm::ElectronElectron => a == Electron && b == Electron,
            CoulombTerm::NucleusNucleus => a == Nucleus && b == Nucleus,
            CoulombTerm::ElectronNucleus => a != b,
        }
    }

    fn label(self) -> TermLabel {
        match self {
            CoulombTerm::ElectronElectron => TermLabel::ElectronElectron,
            CoulombTerm::ElectronNucleus => TermLabel::ElectronNucleus,
            CoulombTerm::NucleusNucleus => TermLabel::NucleusNucleus,
            CoulombTerm::All => TermLabel::Composite,
        }
    }
}

/// Real energy per joint basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    pub energies: Vec<f64>,
    pub label: TermLabel,
}

impl DiagonalOperator {
    pub fn new(energies: Vec<f64>, label: TermLabel) -> Self {
        DiagonalOperator { energies, label }
    }

    pub fn zeros(dim: usize, label: TermLabel) -> Self {
        Self::new(vec![0.0; dim], label)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Element-wise sum; the result is labelled composite unless both labels agree.
    pub fn add(&self, other: &DiagonalOperator) -> Result<DiagonalOperator> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let label = if self.label == other.label {
            self.label
        } else {
            TermLabel::Composite
        };
        let energies = self
            .energies
            .iter()
            .zip(&other.energies)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DiagonalOperator { energies, label })
    }

    pub fn min(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.energies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Coulomb energy of a charge pair at cell centers, regularized to `qq/δ`
/// when both sit in the same cell.
pub fn pair_energy(r_p: &[f64], r_q: &[f64], charge_product: f64, delta: f64) -> f64 {
    let dist2: f64 = r_p.iter().zip(r_q).map(|(a, b)| (a - b) * (a - b)).sum();
    // cell centers are either equal or at least δ apart
    if dist2 < 0.25 * delta * delta {
        charge_product / delta
    } else {
        charge_product / dist2.sqrt()
    }
}

fn check_particles(grid: &GridSpec, particles: &[ParticleSpec]) -> Result<usize> {
    for p in particles {
        p.validate(grid)?;
    }
    Ok(particles.iter().filter(|p| p.is_quantum()).count())
}

fn joint_dim(grid: &GridSpec, quantum: usize) -> Result<usize> {
    grid.check_capacity(quantum)?;
    let dim = IndexCodec::for_grid(grid, quantum).dim();
    if dim > MAX_DIAGONAL_DIM {
        return Err(Error::guard(format!(
            "joint dimension {dim} too large for a dense diagonal"
        )));
    }
    Ok(dim)
}

/// Coulomb diagonal over the joint basis of the quantum particles in `particles`.
///
/// Quantum particles are mapped to registers in the order they appear;
/// clamped particles contribute from their fixed cell centers. With no
/// quantum particle the result is a single constant entry.
pub fn build_coulomb_diagonal(
    grid: &GridSpec,
    particles: &[ParticleSpec],
    term: CoulombTerm,
) -> Result<DiagonalOperator> {
    let quantum = check_particles(grid, particles)?;
    let dim = if quantum == 0 {
        1
    } else {
        joint_dim(grid, quantum)?
    };
    let codec = IndexCodec::for_grid(grid, quantum);
    let d = grid.dims();
    let delta = grid.cell_width();

    let mut pairs = Vec::new();
    for a in 0..particles.len() {
        for b in a + 1..particles.len() {
            if term.selects(particles[a].species, particles[b].species) {
                pairs.push((a, b, particles[a].charge * particles[b].charge));
            }
        }
    }

    // fixed coordinates of clamped particles; register slot of quantum ones
    let mut slots = Vec::with_capacity(particles.len());
    let mut next = 0usize;
    for p in particles {
        match p.clamped_cell() {
            Some(cell) => slots.push(Err(grid.cell_center(cell)?)),
            None => {
                slots.push(Ok(next));
                next += 1;
            }
        }
    }

    let energy_at = |m: usize, cells: &mut [usize], coords: &mut [f64]| -> f64 {
        if quantum > 0 {
            codec.decode_unchecked(m, cells);
        }
        let position = |i: usize, out: &mut [f64]| match &slots[i] {
            Ok(slot) => {
                for (ax, v) in out.iter_mut().enumerate() {
                    *v = grid.coordinate(cells[slot * d + ax]);
                }
            }
            Err(fixed) => out.copy_from_slice(fixed),
        };
        let (ra, rb) = coords.split_at_mut(d);
        pairs
            .iter()
            .map(|&(a, b, qq)| {
                position(a, ra);
                position(b, rb);
                pair_energy(ra, rb, qq, delta)
            })
            .sum()
    };

    let registers = codec.registers().max(1);
    let energies: Vec<f64> = (0..dim)
        .into_par_iter()
        .map_init(
            || (vec![0usize; registers], vec![0.0f64; 2 * d]),
            |(cells, coords), m| energy_at(m, cells, coords),
        )
        .collect();
    Ok(DiagonalOperator::new(energies, term.label()))
}

/// Single-particle wall: `v_wall` on the first and last cell of every axis,
/// summed over axes.
pub fn wall_potential(grid: &GridSpec, v_wall: f64) -> Result<DiagonalOperator> {
    wall_potential_joint(grid, 1, v_wall)
}

/// Wall potential for `quantum` particles, summed over particles and axes.
pub fn wall_potential_joint(
    grid: &GridSpec,
    quantum: usize,
    v_wall: f64,
) -> Result<DiagonalOperator> {
    if !(v_wall.is_finite() && v_wall > 0.0) {
        return Err(Error::invalid(format!(
            "wall height must be positive, got {v_wall}"
        )));
    }
    if quantum == 0 {
        return Err(Error::invalid(
            "wall potential needs at least one quantum particle",
        ));
    }
    let dim = joint_dim(grid, quantum)?;
    let n = grid.qubits_per_axis();
    let last = grid.cells_per_axis() - 1;
    let registers = grid.dims() * quantum;
    let energies = (0..dim)
        .into_par_iter()
        .map(|m| {
            (0..registers)
                .filter(|r| {
                    let c = (m >> (n as usize * (registers - 1 - r))) & last;
                    c == 0 || c == last
                })
                .count() as f64
                * v_wall
        })
        .collect();
    Ok(DiagonalOperator::new(energies, TermLabel::Wall))
}

/// `amplitude[m] *= exp(-i ε E[m])`.
pub fn apply_diagonal_phase(
    state: &mut StateVector,
    diag: &DiagonalOperator,
    eps: f64,
) -> Result<()> {
    if diag.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: diag.len(),
        });
    }
    if !eps.is_finite() {
        return Err(Error::invalid("time step must be finite"));
    }
    let apply = |(a, e): (&mut Complex64, &f64)| *a *= Complex64::from_polar(1.0, -eps * e);
    if state.dim() >= 1 << 14 {
        state
            .amplitudes_mut()
            .par_iter_mut()
            .zip(diag.energies.par_iter())
            .for_each(apply);
    } else {
        state
            .amplitudes_mut()
            .iter_mut()
            .zip(diag.energies.iter())
            .for_each(apply);
    }
    Ok(())
}

/// Extreme potential energies
/// `U_max = (e'/δ)(N_e(N_e-1)/2 + Σ_{i<j} Z_i Z_j)` and `U_min = -(e'/δ) Σ Z_i`.
pub fn potential_bounds(grid: &GridSpec, particles: &[ParticleSpec]) -> (f64, f64) {
    let delta = grid.cell_width();
    let electrons = particles
        .iter()
        .filter(|p| p.species == Species::Electron)
        .count() as f64;
    let z: Vec<f64> = particles
        .iter()
        .filter(|p| p.species == Species::Nucleus)
        .map(|p| p.charge)
        .collect();
    let mut zz = 0.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            zz += z[i] * z[j];
        }
    }
    let u_max = (electrons * (electrons - 1.0) / 2.0 + zz) / delta;
    let u_min = -z.iter().sum::<f64>() / delta;
    (u_min, u_max)
}

/// Result of bucketing a diagonal to multiples of `ΔU`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelQuantization {
    /// `ΔU = e' δ² / (2 L³)`.
    pub delta_u: f64,
    /// Smallest and largest entry of the diagonal.
    pub u_min: f64,
    pub u_max: f64,
    /// Number of distinct multiples of `ΔU` hit (rounding to nearest).
    pub levels: usize,
}

impl LevelQuantization {
    /// `ceil((u_max - u_min)/ΔU) + 1`.
    pub fn level_bound(&self) -> usize {
        ((self.u_max - self.u_min) / self.delta_u).ceil() as usize + 1
    }
}

pub fn level_increment(grid: &GridSpec) -> f64 {
    let l = grid.box_length();
    grid.cell_width().powi(2) / (2.0 * l * l * l)
}

pub fn quantize_levels(diag: &DiagonalOperator, grid: &GridSpec) -> LevelQuantization {
    let delta_u = level_increment(grid);
    let levels: BTreeSet<i64> = diag
        .energies
        .iter()
        .map(|e| (e / delta_u).round() as i64)
        .collect();
    LevelQuantization {
        delta_u,
        u_min: diag.min(),
        u_max: diag.max(),
        levels: levels.len(),
    }
}

pub const ANTIDIAGONAL_TOLERANCE: f64 = 1e-10;

/// First index `x` with `E[x] != E[dim-1-x]` (beyond tolerance), if any.
pub fn antidiagonal_mismatch(diag: &DiagonalOperator) -> Option<usize> {
    let e = &diag.energies;
    let dim = e.len();
    (0..dim / 2).find(|&x| (e[x] - e[dim - 1 - x]).abs() > ANTIDIAGONAL_TOLERANCE)
}

/// True iff `E[x] = E[dim-1-x]` for every `x` within 1e-10.
pub fn antidiagonal_symmetry_check(diag: &DiagonalOperator) -> bool {
    antidiagonal_mismatch(diag).is_none()
}
