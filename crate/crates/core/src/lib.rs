//! Classical state-vector simulation of discretized many-body Schrödinger
//! evolution on a qubit-register position grid.
//!
//! Atomic units throughout (`ħ = m_e = e²/4πε₀ = 1`).

pub mod error;
pub mod evolution;
pub mod grid;
pub mod kinetic;
pub mod oracles;
pub mod potential;
pub mod qft;
pub mod synthesis;

pub use error::{Error, Result};
pub use evolution::{
    evolve, sample_configurations, step, EvolutionPlan, EvolutionReport, Histogram, KineticMethod,
    PreparedOperators, Snapshot, Splitting, TermSet,
};
pub use grid::{
    build_grid, encode_state, GridSpec, IndexCodec, ParticleSpec, Placement, Species, StateVector,
};
pub use kinetic::{
    apply_kinetic_spectral, apply_kinetic_trotter, fourier_conjugation_diagnostic, momentum_matrix,
    mp_block, KineticTrotterPlan, SpectralKineticPlan,
};
pub use oracles::{
    box_exact_density, dense_evolution_oracle, e_yb, loglog_slope, rmse, BoxSeriesSpec,
    DenseEvolutionOracle,
};
pub use potential::{
    antidiagonal_symmetry_check, build_coulomb_diagonal, potential_bounds, quantize_levels,
    wall_potential, CoulombTerm, DiagonalOperator,
};
pub use qft::{iqft, qft, Qft};
pub use synthesis::{
    antidiagonal_fold, circuit_unitary, count_kinetic_gates, synthesize_diagonal, Circuit, Gate,
};
