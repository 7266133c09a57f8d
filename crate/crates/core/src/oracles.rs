//! Reference solutions and error metrics.
//!
//! The dense evolution oracle uses the same finite-difference momentum
//! matrix as the simulator, so it measures splitting error only, not the
//! spatial discretization error.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{EvolutionPlan, PreparedOperators, TermSet};
use crate::grid::{GridSpec, IndexCodec, ParticleSpec, Species, StateVector};
use crate::kinetic::momentum_matrix;

pub const DEFAULT_SERIES_TERMS: usize = 1000;

/// Largest joint dimension the dense oracle accepts.
pub const MAX_DENSE_ORACLE_DIM: usize = 1 << 12;

/// Particle in a box of length `box_length`, started from the flat state
/// `1/sqrt(L)` and expanded in the odd box eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSeriesSpec {
    pub box_length: f64,
    pub mass: f64,
    pub terms: usize,
    pub time: f64,
}

impl BoxSeriesSpec {
    pub fn new(box_length: f64, mass: f64, time: f64) -> Self {
        BoxSeriesSpec {
            box_length,
            mass,
            terms: DEFAULT_SERIES_TERMS,
            time,
        }
    }

    pub fn with_terms(mut self, terms: usize) -> Self {
        self.terms = terms;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::invalid("box length must be positive"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass must be positive"));
        }
        if self.terms == 0 {
            return Err(Error::invalid("series needs at least one term"));
        }
        if !self.time.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        Ok(())
    }

    /// `E_a = a² π² / (2 m L²)`.
    pub fn energy(&self, a: usize) -> f64 {
        let a = a as f64;
        a * a * PI * PI / (2.0 * self.mass * self.box_length * self.box_length)
    }
}

/// `|ψ(x, t)|²` from the truncated eigenfunction series.
pub fn box_exact_density(x: f64, spec: &BoxSeriesSpec) -> Result<f64> {
    spec.validate()?;
    let l = spec.box_length;
    if !(x > 0.0 && x < l) {
        return Err(Error::invalid(format!(
            "x = {x} lies outside the open box (0, {l})"
        )));
    }
    let norm = (2.0 / l).sqrt();
    let mut psi = Complex64::default();
    for k in 1..=spec.terms {
        let a = 2 * k - 1;
        let amp = norm * (a as f64 * PI * x / l).sin() / a as f64;
        psi += Complex64::from_polar(amp, -spec.energy(a) * spec.time);
    }
    psi *= 2f64.powf(1.5) / PI;
    Ok(psi.norm_sqr())
}

/// Exact density at every cell center of a 1D grid.
pub fn box_exact_profile(grid: &GridSpec, spec: &BoxSeriesSpec) -> Result<Vec<f64>> {
    if grid.dims() != 1 {
        return Err(Error::invalid("the box series is one-dimensional"));
    }
    if (grid.box_length() - spec.box_length).abs() > 1e-12 * spec.box_length {
        return Err(Error::invalid("grid and series box lengths differ"));
    }
    (0..grid.cells_per_axis())
        .into_par_iter()
        .map(|i| box_exact_density(grid.coordinate(i), spec))
        .collect()
}

/// `2^{-n/2} sqrt(Σ (a_i - b_i)²)` for vectors of length `2^n`.
pub fn rmse(simulated: &[f64], exact: &[f64]) -> Result<f64> {
    if simulated.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            expected: simulated.len(),
            actual: exact.len(),
        });
    }
    if simulated.is_empty() || !simulated.len().is_power_of_two() {
        return Err(Error::invalid("rmse expects a power-of-two length"));
    }
    let ss: f64 = simulated
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss.sqrt() / (simulated.len() as f64).sqrt())
}

/// Yepez–Boghosian error, `2^{-n/2}` times the RMSE.
pub fn e_yb(rmse_value: f64, n: u32) -> Result<f64> {
    if rmse_value.is_nan() || rmse_value < 0.0 {
        return Err(Error::invalid("rmse must be non-negative"));
    }
    Ok(rmse_value * 2f64.powf(-(n as f64) / 2.0))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two points"));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::invalid(format!(
            "log-log fit needs positive finite points, got {p:?}"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct x values"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Dense Hamiltonian with its eigendecomposition, for exact propagation.
#[derive(Debug, Clone)]
pub struct DenseEvolutionOracle {
    hamiltonian: DMatrix<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    time: f64,
}

/// Build the oracle for `e^{-iHT}` with `H = Σ P²/2M + U`.
///
/// Kinetic and potential terms follow `terms`; the wall uses `wall_height`.
pub fn dense_evolution_oracle(
    grid: &GridSpec,
    particles: &[ParticleSpec],
    terms: &TermSet,
    wall_height: f64,
    time: f64,
) -> Result<DenseEvolutionOracle> {
    if !time.is_finite() {
        return Err(Error::invalid("oracle time must be finite"));
    }
    let quantum: Vec<&ParticleSpec> = particles.iter().filter(|p| p.is_quantum()).collect();
    if quantum.is_empty() {
        return Err(Error::invalid("oracle needs at least one quantum particle"));
    }
    let codec = IndexCodec::for_grid(grid, quantum.len());
    let dim = codec.dim();
    if dim > MAX_DENSE_ORACLE_DIM {
        return Err(Error::guard(format!(
            "dense oracle limited to dimension {MAX_DENSE_ORACLE_DIM}, got {dim}"
        )));
    }

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let ops = PreparedOperators::new(
        grid,
        particles,
        &EvolutionPlan::new(1.0, 1)?.with_terms(*terms),
        wall_height,
    )?;
    if let Some(u) = ops.potential_diagonal() {
        for (i, e) in u.energies.iter().enumerate() {
            h[(i, i)] += e;
        }
    }

    let cells = grid.cells_per_axis();
    let p2 = momentum_matrix(cells, grid.cell_width())?.square();
    for (slot, p) in quantum.iter().enumerate() {
        let on = match p.species {
            Species::Electron => terms.electron_kinetic,
            Species::Nucleus => terms.nuclear_kinetic,
        };
        if !on {
            continue;
        }
        let scale = 1.0 / (2.0 * p.mass);
        for axis in 0..grid.dims() {
            let stride = codec.stride(slot * grid.dims() + axis);
            for m in 0..dim {
                let c = (m / stride) % cells;
                let base = m - c * stride;
                for c2 in 0..cells {
                    let v = p2[(c, c2)];
                    if v != 0.0 {
                        h[(m, base + c2 * stride)] += scale * v;
                    }
                }
            }
        }
    }
    let eigen = SymmetricEigen::new(h.clone());
    Ok(DenseEvolutionOracle {
        hamiltonian: h,
        eigen,
        time,
    })
}

impl DenseEvolutionOracle {
    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// `e^{-iHT}` as a dense matrix from the eigendecomposition.
    pub fn propagator(&self) -> DMatrix<Complex64> {
        let v = self.eigen.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let phases = DVector::from_iterator(
            self.dim(),
            self.eigen
                .eigenvalues
                .iter()
                .map(|&l| Complex64::from_polar(1.0, -l * self.time)),
        );
        let mut vd = v.clone();
        for (j, mut col) in vd.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        vd * v.transpose()
    }

    /// `e^{-iHT}` by scaling and squaring of the complex matrix exponential.
    pub fn propagator_by_exponential(&self) -> DMatrix<Complex64> {
        self.hamiltonian
            .map(|x| Complex64::new(0.0, -x * self.time))
            .exp()
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        let v = self.eigen.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let psi = DVector::from_column_slice(state.amplitudes());
        let mut coeffs = v.tr_mul(&psi);
        for (c, &l) in coeffs.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -l * self.time);
        }
        let out = v * coeffs;
        StateVector::from_amplitudes(
            *state.grid(),
            state.particles().to_vec(),
            out.as_slice().to_vec(),
        )
    }
}
