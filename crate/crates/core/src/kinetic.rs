//! Discrete momentum operator and the two kinetic propagators.
//!
//! The momentum matrix is `P = -iħ/(2δ) A` where `A` is the antisymmetric
//! tridiagonal matrix with `+1` above and `-1` below the diagonal. Its square
//! `P² = -(ħ²/4δ²) A²` couples only next-nearest neighbours, so each axis
//! register splits into even and odd sublattices that never mix under either
//! propagator. This is a property of the stencil, kept as is.
//!
//! * Trotter method: `exp(ξ A²)` with `ξ = iħε/(8Mδ²)` is approximated by the
//!   endpoint phase `e^{-ξ}` on cell 0, the 3×3 blocks `exp(ξ P_i)` on cells
//!   `(i-1, i, i+1)` for `i = 1 .. D-2`, and the endpoint phase on cell `D-1`,
//!   applied to the state in exactly that (ascending) order.
//! * Spectral method: `F† diag(exp(-iε p_k²/2M)) F` with
//!   `p_k = -(ħ/δ) sin(2πk/D)`. Periodic in the register, so box problems
//!   need an explicit wall potential.
//!
//! ħ = 1 throughout.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::StateVector;
use crate::qft::Qft;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest register length accepted by [`fourier_conjugation_diagnostic`].
pub const MAX_DENSE_DIAGNOSTIC_DIM: usize = 4096;

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::invalid(format!(
            "register dimension must be >= 2, got {dim}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_time_step(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid(format!(
            "time step must be non-negative, got {eps}"
        )));
    }
    Ok(())
}

/// One-sided differences at the ends, centered differences inside, scaled by `1/(2δ)`.
pub fn derivative_matrix(dim: usize, delta: f64) -> Result<DMatrix<f64>> {
    check_dim(dim)?;
    check_positive("cell width", delta)?;
    let s = 1.0 / (2.0 * delta);
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = -2.0 * s;
    m[(0, 1)] = 2.0 * s;
    m[(dim - 1, dim - 2)] = -2.0 * s;
    m[(dim - 1, dim - 1)] = 2.0 * s;
    for k in 1..dim - 1 {
        m[(k, k - 1)] = -s;
        m[(k, k + 1)] = s;
    }
    Ok(m)
}

/// Hermitian tridiagonal momentum operator of one axis register.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMatrix {
    dim: usize,
    delta: f64,
}

impl MomentumMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_width(&self) -> f64 {
        self.delta
    }

    /// Off-diagonal scale `α = -iħ/(2δ)`.
    pub fn alpha(&self) -> Complex64 {
        -I / (2.0 * self.delta)
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        if col == row + 1 {
            self.alpha()
        } else if row == col + 1 {
            -self.alpha()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.entry(r, c))
    }

    /// `P²` as a real symmetric matrix.
    pub fn square(&self) -> DMatrix<f64> {
        let s = -1.0 / (4.0 * self.delta * self.delta);
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            let interior = k > 0 && k + 1 < self.dim;
            m[(k, k)] = if interior { -2.0 * s } else { -s };
            if k + 2 < self.dim {
                m[(k, k + 2)] = s;
                m[(k + 2, k)] = s;
            }
        }
        m
    }
}

pub fn momentum_matrix(dim: usize, delta: f64) -> Result<MomentumMatrix> {
    check_dim(dim)?;
    check_positive("cell width", delta)?;
    Ok(MomentumMatrix { dim, delta })
}

/// Closed form of `exp([[0,0,ξ],[0,-2ξ,0],[ξ,0,0]])`.
pub fn mp_block(xi: Complex64) -> Matrix3<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let (c, s, m) = (xi.cosh(), xi.sinh(), (-2.0 * xi).exp());
    Matrix3::new(c, z, s, z, m, z, s, z, c)
}

/// `ξ = iħε / (8 M δ²)`.
pub fn trotter_xi(delta: f64, mass: f64, eps: f64) -> Complex64 {
    I * eps / (8.0 * mass * delta * delta)
}

/// Coefficients of one pass of the block product at a fixed `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BlockPass {
    cosh: Complex64,
    sinh: Complex64,
    middle: Complex64,
    endpoint: Complex64,
}

impl BlockPass {
    fn new(xi: Complex64) -> Self {
        BlockPass {
            cosh: xi.cosh(),
            sinh: xi.sinh(),
            middle: (-2.0 * xi).exp(),
            endpoint: (-xi).exp(),
        }
    }

    fn block(&self, line: &mut [Complex64], i: usize) {
        let (a, b) = (line[i - 1], line[i + 1]);
        line[i - 1] = self.cosh * a + self.sinh * b;
        line[i + 1] = self.sinh * a + self.cosh * b;
        line[i] *= self.middle;
    }

    fn ascending(&self, line: &mut [Complex64]) {
        let d = line.len();
        line[0] *= self.endpoint;
        for i in 1..d - 1 {
            self.block(line, i);
        }
        line[d - 1] *= self.endpoint;
    }

    fn descending(&self, line: &mut [Complex64]) {
        let d = line.len();
        line[d - 1] *= self.endpoint;
        for i in (1..d - 1).rev() {
            self.block(line, i);
        }
        line[0] *= self.endpoint;
    }
}

/// Block-product kinetic propagator for one register at fixed `ε` and mass.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticTrotterPlan {
    dim: usize,
    xi: Complex64,
    symmetric: bool,
    full: BlockPass,
    half: BlockPass,
}

impl KineticTrotterPlan {
    /// First-order ascending product.
    pub fn new(dim: usize, delta: f64, mass: f64, eps: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("cell width", delta)?;
        check_positive("mass", mass)?;
        check_time_step(eps)?;
        let xi = trotter_xi(delta, mass, eps);
        Ok(KineticTrotterPlan {
            dim,
            xi,
            symmetric: false,
            full: BlockPass::new(xi),
            half: BlockPass::new(xi / 2.0),
        })
    }

    /// Second-order variant: ascending product at `ξ/2` followed by the
    /// descending product at `ξ/2`.
    pub fn symmetric(dim: usize, delta: f64, mass: f64, eps: f64) -> Result<Self> {
        let mut plan = Self::new(dim, delta, mass, eps)?;
        plan.symmetric = true;
        Ok(plan)
    }

    pub fn xi(&self) -> Complex64 {
        self.xi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Positions `i` of the `exp(ξ P_i)` blocks in application order.
    pub fn block_positions(&self) -> Vec<usize> {
        let asc: Vec<usize> = (1..self.dim - 1).collect();
        if self.symmetric {
            asc.iter().chain(asc.iter().rev()).copied().collect()
        } else {
            asc
        }
    }

    pub fn apply_line(&self, line: &mut [Complex64]) {
        debug_assert_eq!(line.len(), self.dim);
        if self.symmetric {
            self.half.ascending(line);
            self.half.descending(line);
        } else {
            self.full.ascending(line);
        }
    }
}

/// Fourier-diagonal kinetic propagator for one register.
#[derive(Debug, Clone)]
pub struct SpectralKineticPlan {
    qft: Qft,
    phases: Vec<Complex64>,
}

impl SpectralKineticPlan {
    pub fn new(dim: usize, delta: f64, mass: f64, eps: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("cell width", delta)?;
        check_positive("mass", mass)?;
        check_time_step(eps)?;
        let qft = Qft::new(dim)?;
        let phases = (0..dim)
            .map(|k| {
                let p = momentum_value(k, dim, delta);
                Complex64::from_polar(1.0, -eps * p * p / (2.0 * mass))
            })
            .collect();
        Ok(SpectralKineticPlan { qft, phases })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phase_table(&self) -> &[Complex64] {
        &self.phases
    }

    pub fn apply_line(&self, line: &mut [Complex64], scratch: &mut [Complex64]) {
        self.qft.forward(line, scratch);
        for (v, p) in line.iter_mut().zip(&self.phases) {
            *v *= p;
        }
        self.qft.inverse(line, scratch);
    }

    fn scratch_len(&self) -> usize {
        self.qft.scratch_len()
    }
}

#[inline]
fn momentum_value(k: usize, dim: usize, delta: f64) -> f64 {
    -(2.0 * PI * k as f64 / dim as f64).sin() / delta
}

/// Momentum eigenvalue `-(ħ/δ) sin(2πk/D)` of the Fourier-diagonal operator.
pub fn momentum_eigenvalue(k: usize, dim: usize, delta: f64) -> Result<f64> {
    if k >= dim {
        return Err(Error::IndexOutOfRange {
            index: k,
            limit: dim,
        });
    }
    check_positive("cell width", delta)?;
    Ok(momentum_value(k, dim, delta))
}

/// Either kinetic propagator, prepared for one register length, mass and step.
#[derive(Debug, Clone)]
pub enum KineticPlan {
    Trotter(KineticTrotterPlan),
    Spectral(SpectralKineticPlan),
}

impl KineticPlan {
    pub fn dim(&self) -> usize {
        match self {
            KineticPlan::Trotter(p) => p.dim(),
            KineticPlan::Spectral(p) => p.dim(),
        }
    }

    fn scratch_len(&self) -> usize {
        match self {
            KineticPlan::Trotter(_) => 0,
            KineticPlan::Spectral(p) => p.scratch_len(),
        }
    }

    fn apply_line(&self, line: &mut [Complex64], scratch: &mut [Complex64]) {
        match self {
            KineticPlan::Trotter(p) => p.apply_line(line),
            KineticPlan::Spectral(p) => p.apply_line(line, scratch),
        }
    }

    /// Apply to register `register` of `state` (identity on every other register).
    pub fn apply(&self, state: &mut StateVector, register: usize) -> Result<()> {
        let codec = state.codec();
        if register >= codec.registers() {
            return Err(Error::IndexOutOfRange {
                index: register,
                limit: codec.registers(),
            });
        }
        let len = state.grid().cells_per_axis();
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        apply_on_register(state.amplitudes_mut(), len, codec.stride(register), self);
        Ok(())
    }
}

const PARALLEL_THRESHOLD: usize = 1 << 14;

/// Run `plan` over every line of one register. Lines are disjoint, so the
/// result does not depend on how the work is split.
fn apply_on_register(amps: &mut [Complex64], len: usize, stride: usize, plan: &KineticPlan) {
    let chunk = len * stride;
    let work = |block: &mut [Complex64]| {
        let mut scratch = vec![Complex64::default(); plan.scratch_len()];
        if stride == 1 {
            plan.apply_line(block, &mut scratch);
            return;
        }
        let mut line = vec![Complex64::default(); len];
        for inner in 0..stride {
            for (k, v) in line.iter_mut().enumerate() {
                *v = block[inner + k * stride];
            }
            plan.apply_line(&mut line, &mut scratch);
            for (k, v) in line.iter().enumerate() {
                block[inner + k * stride] = *v;
            }
        }
    };
    if amps.len() >= PARALLEL_THRESHOLD {
        amps.par_chunks_mut(chunk).for_each(work);
    } else {
        amps.chunks_mut(chunk).for_each(work);
    }
}

/// Apply the block-product kinetic factor to one `(particle, axis)` register.
pub fn apply_kinetic_trotter(
    state: &mut StateVector,
    particle: usize,
    axis: usize,
    mass: f64,
    eps: f64,
) -> Result<()> {
    let register = state.codec().register(particle, axis)?;
    let grid = *state.grid();
    let plan = KineticTrotterPlan::new(grid.cells_per_axis(), grid.cell_width(), mass, eps)?;
    KineticPlan::Trotter(plan).apply(state, register)
}

/// Apply the Fourier-diagonal kinetic factor to one `(particle, axis)` register.
pub fn apply_kinetic_spectral(
    state: &mut StateVector,
    particle: usize,
    axis: usize,
    mass: f64,
    eps: f64,
) -> Result<()> {
    let register = state.codec().register(particle, axis)?;
    let grid = *state.grid();
    let plan = SpectralKineticPlan::new(grid.cells_per_axis(), grid.cell_width(), mass, eps)?;
    KineticPlan::Spectral(plan).apply(state, register)
}

/// Result of conjugating the momentum matrix by the QFT.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDiagnostic {
    pub max_off_diagonal: f64,
    /// Real parts of the diagonal of `F P F†`.
    pub diagonal: Vec<f64>,
    /// Largest imaginary part found on the diagonal.
    pub max_diagonal_imag: f64,
}

/// Dense `F P F†` for the tridiagonal momentum matrix.
pub fn fourier_conjugation_diagnostic(dim: usize, delta: f64) -> Result<FourierDiagnostic> {
    check_dim(dim)?;
    if dim > MAX_DENSE_DIAGNOSTIC_DIM {
        return Err(Error::guard(format!(
            "dense diagnostic limited to D <= {MAX_DENSE_DIAGNOSTIC_DIM}, got {dim}"
        )));
    }
    let p = momentum_matrix(dim, delta)?.to_dense();
    let scale = 1.0 / (dim as f64).sqrt();
    let f = DMatrix::from_fn(dim, dim, |j, k| {
        Complex64::from_polar(scale, 2.0 * PI * ((j * k) % dim) as f64 / dim as f64)
    });
    let conj = &f * p * f.adjoint();
    let mut max_off = 0.0f64;
    let mut max_imag = 0.0f64;
    let mut diagonal = Vec::with_capacity(dim);
    for j in 0..dim {
        for k in 0..dim {
            let v = conj[(j, k)];
            if j == k {
                diagonal.push(v.re);
                max_imag = max_imag.max(v.im.abs());
            } else {
                max_off = max_off.max(v.norm());
            }
        }
    }
    Ok(FourierDiagnostic {
        max_off_diagonal: max_off,
        diagonal,
        max_diagonal_imag: max_imag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, encode_state, ParticleSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_state(n: u32, amps: Vec<Complex64>) -> StateVector {
        StateVector::from_amplitudes(
            build_grid(1.0, n, 1).unwrap(),
            vec![ParticleSpec::electron()],
            amps,
        )
        .unwrap()
    }

    fn gaussian(n: u32, center: f64, width: f64, k0: f64) -> StateVector {
        let g = build_grid(1.0, n, 1).unwrap();
        encode_state(&g, &[ParticleSpec::electron()], |x| {
            let d = x[0] - center;
            Complex64::from_polar((-d * d / (2.0 * width * width)).exp(), k0 * x[0])
        })
        .unwrap()
    }

    fn dense_apply(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
        (m * nalgebra::DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn derivative_matrix_examples() {
        let d = derivative_matrix(2, 0.5).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, -2.0, 2.0]));
        for dim in [2, 3, 8, 17] {
            let m = derivative_matrix(dim, 0.1).unwrap();
            for r in 0..dim {
                assert_abs_diff_eq!(m.row(r).sum(), 0.0, epsilon = 1e-12);
            }
        }
        let m = derivative_matrix(4, 0.25).unwrap();
        let ramp = nalgebra::DVector::from_fn(4, |i, _| 0.25 * (i as f64 + 0.5));
        let out = &m * ramp;
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[2], 1.0, epsilon = 1e-14);
        assert!(derivative_matrix(1, 0.1).is_err());
    }

    #[test]
    fn momentum_matrix_smallest_case() {
        let p = momentum_matrix(2, 0.5).unwrap().to_dense();
        assert_eq!(p[(0, 1)], -I);
        assert_eq!(p[(1, 0)], I);
        assert_eq!(p[(0, 0)], Complex64::new(0.0, 0.0));
        assert!(momentum_matrix(1, 0.5).is_err());
    }

    #[test]
    fn momentum_matrix_is_hermitian_with_symmetric_square() {
        for dim in [2usize, 3, 5, 16, 33] {
            let mm = momentum_matrix(dim, 0.3).unwrap();
            let p = mm.to_dense();
            assert_eq!(p, p.adjoint());
            for k in 0..dim {
                assert_eq!(p[(k, k)], Complex64::new(0.0, 0.0));
            }
            let sq = mm.square();
            assert_eq!(sq, sq.transpose());
            // compare with the explicit product
            let prod = &p * &p;
            for r in 0..dim {
                for c in 0..dim {
                    assert!((prod[(r, c)] - Complex64::new(sq[(r, c)], 0.0)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn momentum_eigenvalues_real_and_symmetric() {
        let p = momentum_matrix(4, 0.25).unwrap().to_dense();
        let eig = SymmetricEigen::new(p);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..4 {
            assert_abs_diff_eq!(vals[k], -vals[3 - k], epsilon = 1e-12);
        }
        // nonzero spectrum: 2x2 blocks would give ±1/(2δ); golden-ratio values for D=4
        assert!(vals[3] > 0.0);
    }

    #[test]
    fn mp_block_examples() {
        assert_eq!(mp_block(Complex64::new(0.0, 0.0)), Matrix3::identity());
        let m = mp_block(Complex64::new(0.0, PI / 2.0));
        let z = Complex64::new(0.0, 0.0);
        let expected = Matrix3::new(z, z, I, z, -Complex64::new(1.0, 0.0), z, I, z, z);
        assert!((m - expected).norm() < 1e-15);
    }

    #[test]
    fn mp_block_matches_generic_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = Complex64::new(0.0, 0.0);
        for _ in 0..100 {
            let xi = Complex64::new(0.0, rng.random_range(-4.0..4.0));
            let gen = Matrix3::new(z, z, xi, z, -2.0 * xi, z, xi, z, z);
            let oracle = gen.exp();
            let closed = mp_block(xi);
            assert!((closed - oracle).norm() < 1e-12);
            let u = closed * closed.adjoint();
            assert!((u - Matrix3::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn trotter_zero_step_is_identity() {
        let mut s = gaussian(5, 0.4, 0.1, 3.0);
        let before = s.clone();
        apply_kinetic_trotter(&mut s, 0, 0, 1.0, 0.0).unwrap();
        assert_eq!(s, before);
    }

    /// Explicit factor matrices multiplied in application order.
    fn dense_trotter(dim: usize, xi: Complex64) -> DMatrix<Complex64> {
        let z = Complex64::new(0.0, 0.0);
        let mut u = DMatrix::<Complex64>::identity(dim, dim);
        let mut e0 = DMatrix::<Complex64>::identity(dim, dim);
        e0[(0, 0)] = (-xi).exp();
        u = e0 * u;
        for i in 1..dim - 1 {
            let block = Matrix3::new(z, z, xi, z, -2.0 * xi, z, xi, z, z).exp();
            let mut b = DMatrix::<Complex64>::identity(dim, dim);
            for r in 0..3 {
                for c in 0..3 {
                    b[(i - 1 + r, i - 1 + c)] = block[(r, c)];
                }
            }
            u = b * u;
        }
        let mut el = DMatrix::<Complex64>::identity(dim, dim);
        el[(dim - 1, dim - 1)] = (-xi).exp();
        el * u
    }

    #[test]
    fn trotter_matches_dense_factor_product() {
        let (n, eps, mass) = (3u32, 2e-3, 1.3);
        let dim = 1usize << n;
        let delta = 1.0 / dim as f64;
        let xi = trotter_xi(delta, mass, eps);
        let dense = dense_trotter(dim, xi);
        let plan = KineticPlan::Trotter(KineticTrotterPlan::new(dim, delta, mass, eps).unwrap());
        for col in 0..dim {
            let mut s = StateVector::basis(
                build_grid(1.0, n, 1).unwrap(),
                vec![ParticleSpec::electron()],
                col,
            )
            .unwrap();
            plan.apply(&mut s, 0).unwrap();
            for row in 0..dim {
                assert!((s.amplitudes()[row] - dense[(row, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trotter_point_mass_stays_on_its_sublattice() {
        let dim = 8;
        let mut s = StateVector::basis(
            build_grid(1.0, 3, 1).unwrap(),
            vec![ParticleSpec::electron()],
            3,
        )
        .unwrap();
        apply_kinetic_trotter(&mut s, 0, 0, 1.0, 1e-3).unwrap();
        let dense = dense_trotter(dim, trotter_xi(1.0 / 8.0, 1.0, 1e-3));
        for row in 0..dim {
            assert!((s.amplitudes()[row] - dense[(row, 3)]).norm() < 1e-12);
            if row % 2 == 0 {
                assert_eq!(s.amplitudes()[row], Complex64::new(0.0, 0.0));
            }
        }
        // descending neighbour reached in one block, ascending ones by cascade
        assert!(s.amplitudes()[1].norm() > 0.0);
        assert!(s.amplitudes()[5].norm() > s.amplitudes()[7].norm());
    }

    #[test]
    fn symmetric_trotter_is_second_order_accurate() {
        let dim = 16;
        let delta = 1.0 / dim as f64;
        let mm = momentum_matrix(dim, delta).unwrap();
        let h = mm.square().map(|v| Complex64::new(v / 2.0, 0.0));
        let s0 = gaussian(4, 0.5, 0.1, 0.0);
        let mut errs = Vec::new();
        for eps in [1e-3, 1e-4] {
            let exact = (h.clone() * Complex64::new(0.0, -eps)).exp();
            let target = dense_apply(&exact, s0.amplitudes());
            let mut s = s0.clone();
            KineticPlan::Trotter(KineticTrotterPlan::symmetric(dim, delta, 1.0, eps).unwrap())
                .apply(&mut s, 0)
                .unwrap();
            errs.push(max_diff(s.amplitudes(), &target));
        }
        // local error O(ε³): a decade in ε buys about three decades
        assert!(errs[0] / errs[1] > 500.0, "{errs:?}");
    }

    #[test]
    fn momentum_eigenvalue_examples() {
        assert_eq!(momentum_eigenvalue(0, 8, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            momentum_eigenvalue(1, 4, 0.125).unwrap(),
            -8.0,
            epsilon = 1e-14
        );
        for k in 1..16 {
            let a = momentum_eigenvalue(k, 16, 0.2).unwrap();
            let b = momentum_eigenvalue(16 - k, 16, 0.2).unwrap();
            assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
        }
        assert!(momentum_eigenvalue(16, 16, 0.2).is_err());
    }

    #[test]
    fn spectral_phase_table_unit_modulus() {
        let plan = SpectralKineticPlan::new(64, 1.0 / 64.0, 1.0, 1e-3).unwrap();
        for p in plan.phase_table() {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_zero_step_and_fourier_mode() {
        let mut s = gaussian(5, 0.3, 0.05, 10.0);
        let before = s.clone();
        apply_kinetic_spectral(&mut s, 0, 0, 1.0, 0.0).unwrap();
        assert!(max_diff(s.amplitudes(), before.amplitudes()) < 1e-14);

        // F† e_k is an eigenvector of the diagonal plan
        let dim = 32;
        let mode: Vec<Complex64> = (0..dim)
            .map(|j| {
                Complex64::from_polar(
                    (dim as f64).sqrt().recip(),
                    -2.0 * PI * (3 * j) as f64 / dim as f64,
                )
            })
            .collect();
        let mut s = line_state(5, mode);
        let rho = s.density();
        apply_kinetic_spectral(&mut s, 0, 0, 1.0, 0.01).unwrap();
        for (a, b) in s.density().iter().zip(&rho) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = momentum_eigenvalue(3, dim, 1.0 / 32.0).unwrap();
        let phase = Complex64::from_polar(1.0, -0.01 * p * p / 2.0);
        assert!((s.amplitudes()[0] - phase * (dim as f64).sqrt().recip()).norm() < 1e-12);
    }

    #[test]
    fn spectral_gaussian_spreads_symmetrically_and_matches_dense_flow() {
        let (n, steps, eps) = (8u32, 1000usize, 2e-7);
        let dim = 1usize << n;
        let delta = 1.0 / dim as f64;
        let mut s = gaussian(n, 0.5, 0.03, 0.0);
        let s0 = s.clone();
        let plan = KineticPlan::Spectral(SpectralKineticPlan::new(dim, delta, 1.0, eps).unwrap());
        for _ in 0..steps {
            plan.apply(&mut s, 0).unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-10);
        let rho = s.density();
        // the packet is centred on the boundary between cells 127 and 128
        for k in 0..dim / 2 {
            assert!((rho[k] - rho[dim - 1 - k]).abs() < 1e-12);
        }
        let rho0 = s0.density();
        assert!(rho[dim / 2] < rho0[dim / 2]);

        // dense oracle: exp(-i T F† diag(p²/2) F)
        let f = DMatrix::from_fn(dim, dim, |j, k| {
            Complex64::from_polar(
                (dim as f64).sqrt().recip(),
                2.0 * PI * ((j * k) % dim) as f64 / dim as f64,
            )
        });
        let t = eps * steps as f64;
        let diag = DMatrix::from_fn(dim, dim, |j, k| {
            if j == k {
                let p = momentum_eigenvalue(k, dim, delta).unwrap();
                Complex64::from_polar(1.0, -t * p * p / 2.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let flow = f.adjoint() * diag * f;
        let target = dense_apply(&flow, s0.amplitudes());
        assert!(max_diff(s.amplitudes(), &target) < 1e-10);
    }

    #[test]
    fn both_methods_stay_unitary() {
        for n in [4u32, 7] {
            let dim = 1usize << n;
            let delta = 1.0 / dim as f64;
            let mut a = gaussian(n, 0.4, 0.1, 5.0);
            let mut b = a.clone();
            let tp = KineticPlan::Trotter(KineticTrotterPlan::new(dim, delta, 1.0, 1e-6).unwrap());
            let sp =
                KineticPlan::Spectral(SpectralKineticPlan::new(dim, delta, 1.0, 1e-6).unwrap());
            for _ in 0..1000 {
                tp.apply(&mut a, 0).unwrap();
                sp.apply(&mut b, 0).unwrap();
            }
            assert!((a.norm() - 1.0).abs() < 1e-10);
            assert!((b.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn methods_agree_as_step_shrinks() {
        let n = 6u32;
        let s0 = gaussian(n, 0.5, 0.08, 0.0);
        let mut pts = Vec::new();
        for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
            let mut a = s0.clone();
            let mut b = s0.clone();
            apply_kinetic_trotter(&mut a, 0, 0, 1.0, eps).unwrap();
            apply_kinetic_spectral(&mut b, 0, 0, 1.0, eps).unwrap();
            pts.push((eps, a.distance(&b).unwrap()));
        }
        let slope = crate::oracles::loglog_slope(&pts).unwrap();
        assert!(slope >= 0.9, "slope {slope}, {pts:?}");
    }

    #[test]
    fn axis_operators_commute_in_3d() {
        let g = build_grid(1.0, 3, 3).unwrap();
        let s0 = encode_state(&g, &[ParticleSpec::electron()], |x| {
            Complex64::from_polar(
                (-(x[0] - 0.4).powi(2) * 20.0
                    - (x[1] - 0.6).powi(2) * 30.0
                    - (x[2] - 0.5).powi(2) * 10.0)
                    .exp(),
                3.0 * x[0] - 2.0 * x[2],
            )
        })
        .unwrap();
        for spectral in [false, true] {
            let run = |order: [usize; 3]| {
                let mut s = s0.clone();
                for axis in order {
                    if spectral {
                        apply_kinetic_spectral(&mut s, 0, axis, 1.0, 1e-3).unwrap();
                    } else {
                        apply_kinetic_trotter(&mut s, 0, axis, 1.0, 1e-3).unwrap();
                    }
                }
                s
            };
            let a = run([0, 1, 2]);
            let b = run([2, 0, 1]);
            assert!(max_diff(a.amplitudes(), b.amplitudes()) < 1e-12);
        }
    }

    #[test]
    fn invalid_registers_rejected() {
        let mut s = gaussian(3, 0.5, 0.1, 0.0);
        assert!(apply_kinetic_trotter(&mut s, 1, 0, 1.0, 1e-3).is_err());
        assert!(apply_kinetic_spectral(&mut s, 0, 1, 1.0, 1e-3).is_err());
        assert!(apply_kinetic_spectral(&mut s, 0, 0, 0.0, 1e-3).is_err());
        assert!(apply_kinetic_trotter(&mut s, 0, 0, 1.0, -1.0).is_err());
    }

    #[test]
    fn conjugation_of_two_by_two() {
        // sin(2πk/2) vanishes, so the diagonal is zero and all weight is off-diagonal (±α)
        let diag = fourier_conjugation_diagnostic(2, 0.5).unwrap();
        assert!(diag.diagonal.iter().all(|d| d.abs() < 1e-15));
        assert_abs_diff_eq!(diag.max_off_diagonal, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn conjugation_diagonal_and_decay() {
        let delta = 0.1;
        let mut pts = Vec::new();
        for dim in [8usize, 16, 32, 64, 128] {
            let d = fourier_conjugation_diagnostic(dim, delta).unwrap();
            assert!(d.diagonal[0].abs() < 1e-12);
            assert!(d.max_diagonal_imag < 1e-10);
            for (k, v) in d.diagonal.iter().enumerate() {
                // finite-D value: (D-1)/D times the limit
                let limit = momentum_eigenvalue(k, dim, delta).unwrap();
                assert_abs_diff_eq!(*v, limit * (dim - 1) as f64 / dim as f64, epsilon = 1e-10);
            }
            pts.push((1.0 / dim as f64, d.max_off_diagonal));
        }
        let (o32, o64) = (pts[2].1, pts[3].1);
        assert!(o64 <= 0.5 * o32 * 1.25);
        assert!(crate::oracles::loglog_slope(&pts).unwrap() >= 0.9);
        assert!(fourier_conjugation_diagnostic(8192, 0.1).is_err());
    }
}
