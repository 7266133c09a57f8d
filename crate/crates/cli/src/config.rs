//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wz_core::evolution::{EvolutionPlan, KineticMethod, Splitting, TermSet};
use wz_core::grid::{GridSpec, ParticleSpec, Species, PROTON_MASS};
use wz_core::potential::DEFAULT_WALL_HEIGHT;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BoxEvolve,
    ConvergenceSpatial,
    ConvergenceTemporal,
    Molecule2d,
    Sample,
    SynthReport,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BoxEvolve => "box-evolve",
            Experiment::ConvergenceSpatial => "convergence-spatial",
            Experiment::ConvergenceTemporal => "convergence-temporal",
            Experiment::Molecule2d => "molecule2d",
            Experiment::Sample => "sample",
            Experiment::SynthReport => "synth-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticChoice {
    Trotter,
    Spectral,
}

impl From<KineticChoice> for KineticMethod {
    fn from(k: KineticChoice) -> Self {
        match k {
            KineticChoice::Trotter => KineticMethod::Trotter,
            KineticChoice::Spectral => KineticMethod::Spectral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingChoice {
    FirstOrder,
    Strang,
}

impl From<SplittingChoice> for Splitting {
    fn from(s: SplittingChoice) -> Self {
        match s {
            SplittingChoice::FirstOrder => Splitting::FirstOrder,
            SplittingChoice::Strang => Splitting::Strang,
        }
    }
}

/// How simulated per-cell probabilities are compared with the exact density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseUnits {
    /// Simulated probability divided by the cell width against the exact density.
    Density,
    /// Exact density times the cell width against the simulated probability.
    PerCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesChoice {
    Electron,
    Nucleus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub species: SpeciesChoice,
    /// Defaults to -1 for electrons and +1 for nuclei.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<f64>,
    /// Defaults to 1 for electrons and the proton mass for nuclei.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Fixed cell for a clamped particle; absent means quantum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<usize>>,
}

impl ParticleConfig {
    pub fn electron() -> Self {
        ParticleConfig {
            species: SpeciesChoice::Electron,
            charge: None,
            mass: None,
            cell: None,
        }
    }

    pub fn clamped_proton(cell: Vec<usize>) -> Self {
        ParticleConfig {
            species: SpeciesChoice::Nucleus,
            charge: None,
            mass: None,
            cell: Some(cell),
        }
    }

    pub fn to_spec(&self) -> ParticleSpec {
        let mut p = match self.species {
            SpeciesChoice::Electron => ParticleSpec::electron(),
            SpeciesChoice::Nucleus => ParticleSpec::nucleus(1.0, PROTON_MASS),
        };
        if let Some(q) = self.charge {
            p.charge = q;
        }
        if let Some(m) = self.mass {
            p = p.with_mass(m);
        }
        if let Some(cell) = &self.cell {
            p = p.clamped_at(cell.clone());
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    #[serde(default)]
    pub electron_kinetic: bool,
    #[serde(default)]
    pub nuclear_kinetic: bool,
    #[serde(default)]
    pub electron_electron: bool,
    #[serde(default)]
    pub electron_nucleus: bool,
    #[serde(default)]
    pub nucleus_nucleus: bool,
    #[serde(default)]
    pub wall: bool,
}

impl From<TermConfig> for TermSet {
    fn from(t: TermConfig) -> Self {
        TermSet {
            electron_kinetic: t.electron_kinetic,
            nuclear_kinetic: t.nuclear_kinetic,
            electron_electron: t.electron_electron,
            electron_nucleus: t.electron_nucleus,
            nucleus_nucleus: t.nucleus_nucleus,
            wall: t.wall,
        }
    }
}

impl From<TermSet> for TermConfig {
    fn from(t: TermSet) -> Self {
        TermConfig {
            electron_kinetic: t.electron_kinetic,
            nuclear_kinetic: t.nuclear_kinetic,
            electron_electron: t.electron_electron,
            electron_nucleus: t.electron_nucleus,
            nucleus_nucleus: t.nucleus_nucleus,
            wall: t.wall,
        }
    }
}

/// Initial single-electron wavefunction for box and sampling runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialState {
    /// Equal amplitude on every cell, or on the non-wall cells with `interior_only`.
    Uniform,
    /// `exp(-|x - center|² / 4 width²) e^{i k·x}`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        wavenumber: Vec<f64>,
    },
}

/// Reflection `i -> (center - i) mod 2^n` along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflection {
    pub axis: usize,
    pub center: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub box_length: f64,
    pub qubits_per_axis: u32,
    pub dims: usize,
    pub particles: Vec<ParticleConfig>,
    pub total_time: f64,
    pub steps: usize,
    pub kinetic: KineticChoice,
    pub splitting: SplittingChoice,
    /// Hamiltonian terms; the experiment's usual set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<TermConfig>,
    pub wall_height: f64,
    /// Number of evenly spaced density snapshots recorded during evolution.
    pub snapshots: usize,
    /// Extra times at which box runs write a comparison file.
    pub snapshot_times: Vec<f64>,
    pub initial_state: InitialState,
    pub interior_only: bool,
    pub series_terms: usize,
    pub rmse_units: RmseUnits,
    pub seed: u64,
    pub shots: u64,
    /// Qubits per axis visited by the spatial sweep.
    pub sweep_qubits: Vec<u32>,
    /// Step counts visited by the temporal sweep.
    pub sweep_steps: Vec<usize>,
    /// Inclusive `[lo, hi]` cell range per axis for the initial electron.
    pub electron_region: Vec<[usize; 2]>,
    pub reflections: Vec<Reflection>,
    pub redundant_angles: [f64; 4],
    pub gate_count_particles: Vec<u64>,
    pub gate_count_qubits: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::BoxEvolve,
            box_length: 1.0,
            qubits_per_axis: 10,
            dims: 1,
            particles: vec![ParticleConfig::electron()],
            total_time: 1e-3,
            steps: 1000,
            kinetic: KineticChoice::Spectral,
            splitting: SplittingChoice::FirstOrder,
            terms: None,
            wall_height: DEFAULT_WALL_HEIGHT,
            snapshots: 0,
            snapshot_times: Vec::new(),
            initial_state: InitialState::Uniform,
            interior_only: false,
            series_terms: wz_core::oracles::DEFAULT_SERIES_TERMS,
            rmse_units: RmseUnits::Density,
            seed: 0,
            shots: 100_000,
            sweep_qubits: (1..=10).collect(),
            sweep_steps: vec![10, 20, 50, 100, 200, 500, 1000],
            electron_region: Vec::new(),
            reflections: Vec::new(),
            redundant_angles: [0.3, -1.1, 2.2, 0.7],
            gate_count_particles: vec![1, 2, 3],
            gate_count_qubits: (1..=8).collect(),
            out_dir: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    /// Read a config file, or the resolved config inside a run manifest.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let inner = match value.get("manifest_version") {
            Some(_) => value
                .get("config")
                .cloned()
                .ok_or_else(|| invalid("manifest has no config"))?,
            None => value,
        };
        serde_json::from_value(inner).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn term_set(&self) -> TermSet {
        if let Some(t) = self.terms {
            return t.into();
        }
        match self.experiment {
            Experiment::Molecule2d => TermSet::clamped_molecule(),
            _ => TermSet::particle_in_box(),
        }
    }

    pub fn grid(&self) -> Result<GridSpec, RunError> {
        Ok(GridSpec::new(
            self.box_length,
            self.qubits_per_axis,
            self.dims,
        )?)
    }

    pub fn particle_specs(&self) -> Vec<ParticleSpec> {
        self.particles.iter().map(ParticleConfig::to_spec).collect()
    }

    pub fn plan(&self) -> Result<EvolutionPlan, RunError> {
        Ok(EvolutionPlan::new(self.total_time, self.steps)?
            .with_kinetic(self.kinetic.into())
            .with_splitting(self.splitting.into())
            .with_terms(self.term_set())
            .with_snapshots(self.snapshots))
    }

    /// Experiment-specific checks beyond what the core library validates.
    pub fn validate(&self) -> Result<(), RunError> {
        let grid = self.grid()?;
        let specs = self.particle_specs();
        for p in &specs {
            p.validate(&grid)?;
        }
        self.plan()?.validate()?;
        if !(self.wall_height.is_finite() && self.wall_height > 0.0) {
            return Err(invalid("wall_height must be positive"));
        }
        let quantum = specs.iter().filter(|p| p.is_quantum()).count();
        match self.experiment {
            Experiment::BoxEvolve
            | Experiment::ConvergenceSpatial
            | Experiment::ConvergenceTemporal => {
                if self.dims != 1 || specs.len() != 1 || quantum != 1 {
                    return Err(invalid(
                        "box experiments need one quantum particle in one dimension",
                    ));
                }
                if !self.term_set().wall {
                    return Err(invalid("box experiments need the wall term"));
                }
                if self.initial_state != InitialState::Uniform {
                    return Err(invalid("box experiments start from the uniform state"));
                }
                if self.series_terms == 0 {
                    return Err(invalid("series_terms must be at least 1"));
                }
                if self
                    .snapshot_times
                    .iter()
                    .any(|t| !(t.is_finite() && *t > 0.0))
                {
                    return Err(invalid("snapshot_times must be positive"));
                }
            }
            Experiment::Molecule2d => {
                if self.dims != 2 {
                    return Err(invalid("molecule2d needs dims = 2"));
                }
                if specs
                    .iter()
                    .any(|p| p.species == Species::Nucleus && p.is_quantum())
                {
                    return Err(invalid("molecule2d needs every nucleus clamped"));
                }
                if quantum == 0 {
                    return Err(invalid("molecule2d needs at least one electron"));
                }
                if self.electron_region.len() != self.dims {
                    return Err(invalid("electron_region needs one [lo, hi] range per axis"));
                }
                let cells = grid.cells_per_axis();
                if self
                    .electron_region
                    .iter()
                    .any(|[lo, hi]| lo > hi || *hi >= cells)
                {
                    return Err(invalid(
                        "electron_region ranges must satisfy lo <= hi < 2^n",
                    ));
                }
                if self.reflections.iter().any(|r| r.axis >= self.dims) {
                    return Err(invalid("reflection axis out of range"));
                }
            }
            Experiment::Sample => {
                if self.shots == 0 {
                    return Err(invalid("shots must be at least 1"));
                }
                if quantum != 1 {
                    return Err(invalid("sample runs use a single quantum particle"));
                }
            }
            Experiment::SynthReport => {
                if self.gate_count_particles.contains(&0) || self.gate_count_qubits.contains(&0) {
                    return Err(invalid("gate count sweeps need positive values"));
                }
            }
        }
        match self.experiment {
            Experiment::ConvergenceSpatial => {
                if self.sweep_qubits.len() < 2 {
                    return Err(invalid("spatial sweep needs at least two resolutions"));
                }
                for &n in &self.sweep_qubits {
                    GridSpec::new(self.box_length, n, 1)?;
                }
            }
            Experiment::ConvergenceTemporal
                if self.sweep_steps.len() < 2 || self.sweep_steps.contains(&0) =>
            {
                return Err(invalid(
                    "temporal sweep needs at least two positive step counts",
                ));
            }
            _ => {}
        }
        if let InitialState::Gaussian {
            center,
            width,
            wavenumber,
        } = &self.initial_state
        {
            if center.len() != self.dims || !(width.is_finite() && *width > 0.0) {
                return Err(invalid(
                    "gaussian needs one center per axis and a positive width",
                ));
            }
            if !wavenumber.is_empty() && wavenumber.len() != self.dims {
                return Err(invalid("gaussian wavenumber needs one entry per axis"));
            }
        }
        Ok(())
    }
}
