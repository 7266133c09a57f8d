//! Spatial discretization and the position-basis state vector.
//!
//! Every quantum particle owns one `n`-qubit register per spatial axis. The
//! joint register layout is frozen as: particle-major, then axis order
//! `x, y, z`, then big-endian bits within each axis register. Register `r`
//! (counting from the most significant end) therefore has stride
//! `2^(n * (R - 1 - r))` in the flat index, where `R = d * N_q`.
//!
//! All quantities are in atomic units (bohr, hartree, electron masses).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest accepted number of qubits per axis.
pub const MAX_QUBITS_PER_AXIS: u32 = 20;

/// Largest accepted total register width `d * n * N_q`.
pub const MAX_TOTAL_QUBITS: u32 = 30;

/// Proton mass in electron masses.
pub const PROTON_MASS: f64 = 1_836.152_673_43;

/// Uniform grid over the box `[0, L)^d` with `2^n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    box_length: f64,
    qubits_per_axis: u32,
    dims: usize,
    cell_width: f64,
}

impl GridSpec {
    pub fn new(box_length: f64, qubits_per_axis: u32, dims: usize) -> Result<Self> {
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::invalid(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }
        if qubits_per_axis == 0 || qubits_per_axis > MAX_QUBITS_PER_AXIS {
            return Err(Error::invalid(format!(
                "qubits per axis must lie in 1..={MAX_QUBITS_PER_AXIS}, got {qubits_per_axis}"
            )));
        }
        if !(1..=3).contains(&dims) {
            return Err(Error::invalid(format!(
                "dimensionality must be 1, 2 or 3, got {dims}"
            )));
        }
        // Division by a power of two is exact, so cell_width * 2^n == box_length.
        let cell_width = box_length / (1u64 << qubits_per_axis) as f64;
        Ok(GridSpec {
            box_length,
            qubits_per_axis,
            dims,
            cell_width,
        })
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn qubits_per_axis(&self) -> u32 {
        self.qubits_per_axis
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Cell width `δ = L / 2^n`.
    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    /// Number of cells along one axis, `2^n`.
    pub fn cells_per_axis(&self) -> usize {
        1usize << self.qubits_per_axis
    }

    /// Number of position basis states of a single particle, `2^(d n)`.
    pub fn single_particle_dim(&self) -> usize {
        1usize << (self.qubits_per_axis as usize * self.dims)
    }

    /// Center of the cell with the given per-axis indices: `δ (i + 1/2, ...)`.
    pub fn cell_center(&self, cell: &[usize]) -> Result<Vec<f64>> {
        if cell.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                actual: cell.len(),
            });
        }
        let limit = self.cells_per_axis();
        cell.iter()
            .map(|&i| {
                if i >= limit {
                    Err(Error::IndexOutOfRange { index: i, limit })
                } else {
                    Ok(self.coordinate(i))
                }
            })
            .collect()
    }

    /// Coordinate of the center of cell `i` along any axis. No range check.
    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        self.cell_width * (i as f64 + 0.5)
    }

    /// Check the register-width guard for `quantum_particles` registers sets.
    pub fn check_capacity(&self, quantum_particles: usize) -> Result<()> {
        let total = self.qubits_per_axis as u64 * self.dims as u64 * quantum_particles as u64;
        if total > MAX_TOTAL_QUBITS as u64 {
            return Err(Error::guard(format!(
                "{total} qubits requested, limit is {MAX_TOTAL_QUBITS}"
            )));
        }
        Ok(())
    }
}

/// Shorthand for [`GridSpec::new`].
pub fn build_grid(box_length: f64, qubits_per_axis: u32, dims: usize) -> Result<GridSpec> {
    GridSpec::new(box_length, qubits_per_axis, dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Electron,
    Nucleus,
}

/// Whether a particle is simulated or held fixed at a cell center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Quantum,
    /// Fixed classical point charge at the given per-axis cell indices.
    Clamped(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSpec {
    pub species: Species,
    /// Mass in electron masses.
    pub mass: f64,
    /// Signed charge in elementary charges.
    pub charge: f64,
    pub placement: Placement,
}

impl ParticleSpec {
    pub fn electron() -> Self {
        ParticleSpec {
            species: Species::Electron,
            mass: 1.0,
            charge: -1.0,
            placement: Placement::Quantum,
        }
    }

    /// A nucleus of atomic number `z` with the given mass.
    pub fn nucleus(z: f64, mass: f64) -> Self {
        ParticleSpec {
            species: Species::Nucleus,
            mass,
            charge: z,
            placement: Placement::Quantum,
        }
    }

    pub fn proton() -> Self {
        Self::nucleus(1.0, PROTON_MASS)
    }

    pub fn clamped_at(mut self, cell: Vec<usize>) -> Self {
        self.placement = Placement::Clamped(cell);
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self.placement, Placement::Quantum)
    }

    pub fn clamped_cell(&self) -> Option<&[usize]> {
        match &self.placement {
            Placement::Clamped(c) => Some(c),
            Placement::Quantum => None,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid(format!(
                "particle mass must be positive, got {}",
                self.mass
            )));
        }
        if !self.charge.is_finite() {
            return Err(Error::invalid("particle charge must be finite"));
        }
        if let Placement::Clamped(cell) = &self.placement {
            grid.cell_center(cell)?;
        }
        Ok(())
    }
}

/// Bijection between flat joint indices and per-particle, per-axis cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexCodec {
    qubits_per_axis: u32,
    dims: usize,
    particles: usize,
}

impl IndexCodec {
    pub fn new(qubits_per_axis: u32, dims: usize, particles: usize) -> Self {
        IndexCodec {
            qubits_per_axis,
            dims,
            particles,
        }
    }

    pub fn for_grid(grid: &GridSpec, particles: usize) -> Self {
        Self::new(grid.qubits_per_axis(), grid.dims(), particles)
    }

    /// Number of axis registers, `d * N_q`.
    pub fn registers(&self) -> usize {
        self.dims * self.particles
    }

    pub fn dim(&self) -> usize {
        1usize << (self.qubits_per_axis as usize * self.registers())
    }

    /// Register number of `(particle, axis)`.
    pub fn register(&self, particle: usize, axis: usize) -> Result<usize> {
        if particle >= self.particles {
            return Err(Error::IndexOutOfRange {
                index: particle,
                limit: self.particles,
            });
        }
        if axis >= self.dims {
            return Err(Error::IndexOutOfRange {
                index: axis,
                limit: self.dims,
            });
        }
        Ok(particle * self.dims + axis)
    }

    /// Flat-index stride of a register.
    pub fn stride(&self, register: usize) -> usize {
        1usize << (self.qubits_per_axis as usize * (self.registers() - 1 - register))
    }

    /// Flatten cells given particle-major, axis-minor (`[p0x, p0y, p1x, p1y, ...]`).
    pub fn flat_index(&self, cells: &[usize]) -> Result<usize> {
        if cells.len() != self.registers() {
            return Err(Error::DimensionMismatch {
                expected: self.registers(),
                actual: cells.len(),
            });
        }
        let limit = 1usize << self.qubits_per_axis;
        let mut index = 0usize;
        for &c in cells {
            if c >= limit {
                return Err(Error::IndexOutOfRange { index: c, limit });
            }
            index = (index << self.qubits_per_axis) | c;
        }
        Ok(index)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn cells(&self, index: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.registers()];
        self.cells_into(index, &mut out)?;
        Ok(out)
    }

    pub fn cells_into(&self, index: usize, out: &mut [usize]) -> Result<()> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                limit: self.dim(),
            });
        }
        self.decode_unchecked(index, out);
        Ok(())
    }

    #[inline]
    pub(crate) fn decode_unchecked(&self, index: usize, out: &mut [usize]) {
        let mask = (1usize << self.qubits_per_axis) - 1;
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest & mask;
            rest >>= self.qubits_per_axis;
        }
    }
}

/// Normalized amplitudes over the joint position basis of all quantum particles.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    grid: GridSpec,
    particles: Vec<ParticleSpec>,
}

impl StateVector {
    /// Wrap raw amplitudes. `particles` lists the quantum particles in register order.
    /// The amplitudes are taken as given (not normalized).
    pub fn from_amplitudes(
        grid: GridSpec,
        particles: Vec<ParticleSpec>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid(
                "a state needs at least one quantum particle",
            ));
        }
        if let Some(p) = particles.iter().find(|p| !p.is_quantum()) {
            return Err(Error::invalid(format!(
                "clamped particle {:?} cannot own a register",
                p.species
            )));
        }
        for p in &particles {
            p.validate(&grid)?;
        }
        grid.check_capacity(particles.len())?;
        let codec = IndexCodec::for_grid(&grid, particles.len());
        if amplitudes.len() != codec.dim() {
            return Err(Error::DimensionMismatch {
                expected: codec.dim(),
                actual: amplitudes.len(),
            });
        }
        Ok(StateVector {
            amplitudes,
            grid,
            particles,
        })
    }

    /// Point mass on one joint basis state.
    pub fn basis(grid: GridSpec, particles: Vec<ParticleSpec>, index: usize) -> Result<Self> {
        grid.check_capacity(particles.len())?;
        let dim = IndexCodec::for_grid(&grid, particles.len()).dim();
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, limit: dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::from_amplitudes(grid, particles, amps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn particles(&self) -> &[ParticleSpec] {
        &self.particles
    }

    pub fn codec(&self) -> IndexCodec {
        IndexCodec::for_grid(&self.grid, self.particles.len())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        for a in &mut self.amplitudes {
            *a *= inv;
        }
        Ok(())
    }

    /// `|amplitude|^2` per joint basis state.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability distribution of one quantum particle's cell, summing over
    /// all other registers. Indexed by that particle's own flat cell index.
    pub fn marginal_density(&self, particle: usize) -> Result<Vec<f64>> {
        let count = self.particles.len();
        if particle >= count {
            return Err(Error::IndexOutOfRange {
                index: particle,
                limit: count,
            });
        }
        let bits = self.grid.qubits_per_axis() as usize * self.grid.dims();
        let shift = bits * (count - 1 - particle);
        let mask = (1usize << bits) - 1;
        let mut out = vec![0.0; 1usize << bits];
        for (m, a) in self.amplitudes.iter().enumerate() {
            out[(m >> shift) & mask] += a.norm_sqr();
        }
        Ok(out)
    }

    /// L2 distance between two states on the same basis.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Sample `sampler` at every joint cell-center configuration and normalize.
///
/// Only quantum particles get registers; clamped particles in `particles` are
/// skipped. The sampler receives the concatenated coordinates of all quantum
/// particles, particle-major (`[x0, y0, x1, y1, ...]` in two dimensions).
pub fn encode_state<F>(
    grid: &GridSpec,
    particles: &[ParticleSpec],
    sampler: F,
) -> Result<StateVector>
where
    F: Fn(&[f64]) -> Complex64,
{
    let quantum: Vec<ParticleSpec> = particles
        .iter()
        .filter(|p| p.is_quantum())
        .cloned()
        .collect();
    if quantum.is_empty() {
        return Err(Error::invalid(
            "a state needs at least one quantum particle",
        ));
    }
    grid.check_capacity(quantum.len())?;
    let codec = IndexCodec::for_grid(grid, quantum.len());
    let mut cells = vec![0usize; codec.registers()];
    let mut coords = vec![0.0; codec.registers()];
    let amplitudes = (0..codec.dim())
        .map(|m| {
            codec.decode_unchecked(m, &mut cells);
            for (x, &c) in coords.iter_mut().zip(&cells) {
                *x = grid.coordinate(c);
            }
            sampler(&coords)
        })
        .collect();
    let mut state = StateVector::from_amplitudes(*grid, quantum, amplitudes)?;
    state.normalize()?;
    Ok(state)
}
