//! Experiment runners. Each writes its files into a [`RunOutput`] and
//! returns a JSON summary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use wz_core::evolution::{
    evolve, step, EvolutionPlan, KineticMethod, PreparedOperators, NORM_DRIFT_ABORT,
};
use wz_core::grid::{GridSpec, ParticleSpec, StateVector};
use wz_core::oracles::{box_exact_profile, e_yb, loglog_slope, rmse, BoxSeriesSpec};
use wz_core::synthesis::{
    count_kinetic_gates, diagonal_error, synthesize_diagonal, synthesize_diagonal_naive,
};
use wz_core::{sample_configurations, Error};

use crate::config::{InitialState, Reflection, RmseUnits, RunConfig};
use crate::output::{num, RunOutput};
use crate::RunError;

/// Flat state over all cells, or over the non-wall cells when `interior_only`
/// is set and the axis has any.
pub fn initial_state(
    grid: &GridSpec,
    particle: &ParticleSpec,
    init: &InitialState,
    interior_only: bool,
) -> Result<StateVector, RunError> {
    let last = grid.cells_per_axis() - 1;
    let delta = grid.cell_width();
    let blank = interior_only && last > 1;
    let state = wz_core::grid::encode_state(grid, std::slice::from_ref(particle), |x| {
        let on_wall = x.iter().any(|&xi| {
            let c = (xi / delta).floor() as usize;
            c == 0 || c == last
        });
        if blank && on_wall {
            return Complex64::default();
        }
        match init {
            InitialState::Uniform => Complex64::new(1.0, 0.0),
            InitialState::Gaussian {
                center,
                width,
                wavenumber,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let phase: f64 = x.iter().zip(wavenumber).map(|(a, k)| a * k).sum();
                Complex64::from_polar((-r2 / (4.0 * width * width)).exp(), phase)
            }
        }
    })?;
    Ok(state)
}

/// Simulated box state compared with the series solution at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxPoint {
    pub time: f64,
    pub step: usize,
    /// Per-cell probability of the simulated state.
    pub simulated: Vec<f64>,
    /// Exact probability density at the cell centers.
    pub exact_density: Vec<f64>,
    pub rmse_density: f64,
    pub rmse_per_cell: f64,
    pub norm_drift: f64,
}

impl BoxPoint {
    pub fn rmse(&self, units: RmseUnits) -> f64 {
        match units {
            RmseUnits::Density => self.rmse_density,
            RmseUnits::PerCell => self.rmse_per_cell,
        }
    }
}

fn step_index(t: f64, eps: f64) -> Result<usize, RunError> {
    if eps == 0.0 {
        return if t == 0.0 {
            Ok(0)
        } else {
            Err(RunError::Config(
                "snapshot times need a positive total_time".into(),
            ))
        };
    }
    let k = (t / eps).round();
    if (k * eps - t).abs() > 1e-9 * t.max(eps) {
        return Err(RunError::Config(format!(
            "time {t} is not a multiple of the step {eps}"
        )));
    }
    Ok(k as usize)
}

/// Evolve the box problem on `2^n` cells with `steps` steps of size
/// `total_time / steps`, comparing with the series at each of `times`.
pub fn run_box(
    cfg: &RunConfig,
    n: u32,
    steps: usize,
    times: &[f64],
) -> Result<Vec<BoxPoint>, RunError> {
    let grid = GridSpec::new(cfg.box_length, n, 1)?;
    let particles = cfg.particle_specs();
    let plan = EvolutionPlan::new(cfg.total_time, steps)?
        .with_kinetic(cfg.kinetic.into())
        .with_splitting(cfg.splitting.into())
        .with_terms(cfg.term_set())
        .with_snapshots(0);
    let ops = PreparedOperators::new(&grid, &particles, &plan, cfg.wall_height)?;
    let eps = plan.time_step();
    let mut targets: Vec<(usize, f64)> = times
        .iter()
        .map(|&t| step_index(t, eps).map(|k| (k, t)))
        .collect::<Result<_, _>>()?;
    targets.sort_by_key(|t| t.0);

    let mut state = initial_state(&grid, &particles[0], &cfg.initial_state, cfg.interior_only)?;
    let delta = grid.cell_width();
    let mut done = 0usize;
    let mut max_drift = 0.0f64;
    let mut points = Vec::with_capacity(targets.len());
    for (k, t) in targets {
        while done < k {
            step(&mut state, &ops)?;
            done += 1;
            let drift = (state.norm() - 1.0).abs();
            if drift.is_nan() || drift > NORM_DRIFT_ABORT {
                return Err(Error::NormDrift { step: done, drift }.into());
            }
            max_drift = max_drift.max(drift);
        }
        let series =
            BoxSeriesSpec::new(cfg.box_length, particles[0].mass, t).with_terms(cfg.series_terms);
        let exact = box_exact_profile(&grid, &series)?;
        let simulated = state.density();
        let sim_density: Vec<f64> = simulated.iter().map(|p| p / delta).collect();
        let exact_cell: Vec<f64> = exact.iter().map(|p| p * delta).collect();
        points.push(BoxPoint {
            time: t,
            step: k,
            rmse_density: rmse(&sim_density, &exact)?,
            rmse_per_cell: rmse(&simulated, &exact_cell)?,
            simulated,
            exact_density: exact,
            norm_drift: max_drift,
        });
    }
    Ok(points)
}

pub fn box_evolve(cfg: &RunConfig, out: &mut RunOutput) -> Result<Value, RunError> {
    let mut times = cfg.snapshot_times.clone();
    times.push(cfg.total_time);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = *times.last().unwrap_or(&cfg.total_time);
    // keep the configured step size when running past total_time
    let steps = if cfg.total_time > 0.0 {
        step_index(horizon, cfg.total_time / cfg.steps as f64)?
    } else {
        cfg.steps
    };
    let mut run_cfg = cfg.clone();
    run_cfg.total_time = if cfg.total_time > 0.0 { horizon } else { 0.0 };
    let points = run_box(&run_cfg, cfg.qubits_per_axis, steps.max(1), &times)?;

    let grid = cfg.grid()?;
    let delta = grid.cell_width();
    let mut summary = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let rows: Vec<Vec<String>> = (0..grid.cells_per_axis())
            .map(|c| {
                vec![
                    c.to_string(),
                    num(grid.coordinate(c)),
                    num(p.simulated[c]),
                    num(p.exact_density[c] * delta),
                ]
            })
            .collect();
        let name = format!("box_snapshot_{i:03}.csv");
        out.write_csv(
            &name,
            &[
                "cell",
                "center",
                "simulated_probability",
                "exact_probability",
            ],
            &rows,
        )?;
        let r = p.rmse(cfg.rmse_units);
        summary.push(json!({
            "file": name,
            "time": p.time,
            "step": p.step,
            "rmse": r,
            "e_yb": e_yb(r, cfg.qubits_per_axis)?,
            "rmse_density": p.rmse_density,
            "rmse_per_cell": p.rmse_per_cell,
            "norm_drift": p.norm_drift,
        }));
    }
    let value = json!({
        "experiment": cfg.experiment.name(),
        "rmse_units": cfg.rmse_units,
        "qubits_per_axis": cfg.qubits_per_axis,
        "cell_width": delta,
        "time_step": cfg.total_time / cfg.steps as f64,
        "snapshots": summary,
    });
    out.write_json("summary.json", &value)?;
    Ok(value)
}

/// One point of a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub qubits_per_axis: u32,
    pub steps: usize,
    pub cell_width: f64,
    pub time_step: f64,
    pub rmse: f64,
    pub e_yb: f64,
    pub rmse_density: f64,
    pub rmse_per_cell: f64,
}

fn sweep_point(cfg: &RunConfig, n: u32, steps: usize) -> Result<SweepPoint, RunError> {
    let p = run_box(cfg, n, steps, &[cfg.total_time])?.remove(0);
    let r = p.rmse(cfg.rmse_units);
    Ok(SweepPoint {
        qubits_per_axis: n,
        steps,
        cell_width: cfg.box_length / (1u64 << n) as f64,
        time_step: cfg.total_time / steps as f64,
        rmse: r,
        e_yb: e_yb(r, n)?,
        rmse_density: p.rmse_density,
        rmse_per_cell: p.rmse_per_cell,
    })
}

fn slope_of(
    points: &[SweepPoint],
    x: impl Fn(&SweepPoint) -> f64,
    y: impl Fn(&SweepPoint) -> f64,
) -> Result<f64, RunError> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (x(p), y(p))).collect();
    loglog_slope(&pts).map_err(|e| RunError::Numerical(format!("slope fit: {e}")))
}

fn sweep_rows(points: &[SweepPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                p.qubits_per_axis.to_string(),
                p.steps.to_string(),
                num(p.cell_width),
                num(p.time_step),
                num(p.rmse),
                num(p.e_yb),
                num(p.rmse_density),
                num(p.rmse_per_cell),
            ]
        })
        .collect()
}

const SWEEP_HEADER: [&str; 8] = [
    "n",
    "steps",
    "delta",
    "epsilon",
    "rmse",
    "e_yb",
    "rmse_density",
    "rmse_per_cell",
];

/// RMSE against cell width over `sweep_qubits` at fixed step count.
pub fn convergence_spatial(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, Value), RunError> {
    let points: Vec<SweepPoint> = cfg
        .sweep_qubits
        .par_iter()
        .map(|&n| sweep_point(cfg, n, cfg.steps))
        .collect::<Result<_, _>>()?;
    let delta = |p: &SweepPoint| p.cell_width;
    let rmse_slope = slope_of(&points, delta, |p| p.rmse)?;
    let e_yb_slope = slope_of(&points, delta, |p| p.e_yb)?;
    let value = json!({
        "experiment": cfg.experiment.name(),
        "rmse_units": cfg.rmse_units,
        "steps": cfg.steps,
        "interior_only": cfg.interior_only,
        "rmse_slope": rmse_slope,
        "e_yb_slope": e_yb_slope,
        "slope_gap": e_yb_slope - rmse_slope,
        "rmse_density_slope": slope_of(&points, delta, |p| p.rmse_density)?,
        "rmse_per_cell_slope": slope_of(&points, delta, |p| p.rmse_per_cell)?,
        "points": points,
    });
    Ok((points, value))
}

/// Whether RMSE falls as the step shrinks, pointwise and in envelope.
///
/// The envelope test compares the largest RMSE over the finer half of the
/// step sizes with the largest over the coarser half.
pub fn temporal_trend(points: &[SweepPoint]) -> (bool, bool) {
    let mut by_eps: Vec<&SweepPoint> = points.iter().collect();
    by_eps.sort_by(|a, b| b.time_step.total_cmp(&a.time_step));
    let monotone = by_eps.windows(2).all(|w| w[1].rmse <= w[0].rmse);
    let half = by_eps.len() / 2;
    let peak = |s: &[&SweepPoint]| s.iter().map(|p| p.rmse).fold(f64::NEG_INFINITY, f64::max);
    let envelope = peak(&by_eps[half..]) < peak(&by_eps[..half]);
    (monotone, envelope)
}

/// RMSE against time step over `sweep_steps` at fixed resolution.
pub fn convergence_temporal(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, Value), RunError> {
    let points: Vec<SweepPoint> = cfg
        .sweep_steps
        .par_iter()
        .map(|&steps| sweep_point(cfg, cfg.qubits_per_axis, steps))
        .collect::<Result<_, _>>()?;
    let (monotone, envelope) = temporal_trend(&points);
    let value = json!({
        "experiment": cfg.experiment.name(),
        "rmse_units": cfg.rmse_units,
        "qubits_per_axis": cfg.qubits_per_axis,
        "interior_only": cfg.interior_only,
        "rmse_slope_vs_epsilon": slope_of(&points, |p| p.time_step, |p| p.rmse)?,
        "monotone_decreasing": monotone,
        "envelope_decreasing": envelope,
        "points": points,
    });
    Ok((points, value))
}

pub fn convergence(cfg: &RunConfig, out: &mut RunOutput) -> Result<Value, RunError> {
    let (points, value) = match cfg.experiment {
        crate::config::Experiment::ConvergenceTemporal => convergence_temporal(cfg)?,
        _ => convergence_spatial(cfg)?,
    };
    out.write_csv("convergence.csv", &SWEEP_HEADER, &sweep_rows(&points))?;
    out.write_json("summary.json", &value)?;
    Ok(value)
}

/// Relative L1 distance between a 2D marginal and its reflection.
pub fn reflection_asymmetry(density: &[f64], n: u32, reflection: &Reflection) -> f64 {
    let cells = 1usize << n;
    let mirror = |i: usize| (reflection.center + cells - i % cells) % cells;
    let mut diff = 0.0;
    let mut total = 0.0;
    for ix in 0..cells {
        for iy in 0..cells {
            let (rx, ry) = match reflection.axis {
                0 => (mirror(ix), iy),
                _ => (ix, mirror(iy)),
            };
            diff += (density[ix * cells + iy] - density[rx * cells + ry]).abs();
            total += density[ix * cells + iy];
        }
    }
    diff / total
}

/// Electrons start uniform over `electron_region`, nuclei stay clamped.
pub fn molecule_initial_state(cfg: &RunConfig) -> Result<StateVector, RunError> {
    let grid = cfg.grid()?;
    let quantum: Vec<ParticleSpec> = cfg
        .particle_specs()
        .into_iter()
        .filter(|p| p.is_quantum())
        .collect();
    let codec = wz_core::grid::IndexCodec::for_grid(&grid, quantum.len());
    let mut cells = vec![0usize; codec.registers()];
    let mut amplitudes = Vec::with_capacity(codec.dim());
    for m in 0..codec.dim() {
        codec.cells_into(m, &mut cells)?;
        let inside = cells.chunks(cfg.dims).all(|c| {
            c.iter()
                .zip(&cfg.electron_region)
                .all(|(&i, [lo, hi])| (*lo..=*hi).contains(&i))
        });
        amplitudes.push(Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0));
    }
    let mut state = StateVector::from_amplitudes(grid, quantum, amplitudes)?;
    state.normalize()?;
    Ok(state)
}

pub fn molecule2d(cfg: &RunConfig, out: &mut RunOutput) -> Result<Value, RunError> {
    let grid = cfg.grid()?;
    let particles = cfg.particle_specs();
    let plan = cfg.plan()?;
    let ops = PreparedOperators::new(&grid, &particles, &plan, cfg.wall_height)?;
    let initial = molecule_initial_state(cfg)?;
    let electrons = initial.particles().len();
    let report = evolve(initial, &plan, &ops)?;
    let n = cfg.qubits_per_axis;
    let cells = grid.cells_per_axis();

    let mut per_electron = Vec::new();
    for e in 0..electrons {
        let marginal = report.final_state.marginal_density(e)?;
        let rows: Vec<Vec<String>> = (0..cells * cells)
            .map(|m| {
                let (ix, iy) = (m / cells, m % cells);
                vec![
                    ix.to_string(),
                    iy.to_string(),
                    num(grid.coordinate(ix)),
                    num(grid.coordinate(iy)),
                    num(marginal[m]),
                ]
            })
            .collect();
        let name = format!("electron_{e}_density.csv");
        out.write_csv(&name, &["ix", "iy", "x", "y", "probability"], &rows)?;
        let asym: Vec<Value> = cfg
            .reflections
            .iter()
            .map(|r| {
                json!({
                    "axis": r.axis,
                    "center": r.center,
                    "relative_l1": reflection_asymmetry(&marginal, n, r),
                })
            })
            .collect();
        per_electron.push(json!({
            "file": name,
            "total_probability": marginal.iter().sum::<f64>(),
            "reflections": asym,
        }));
    }

    if !report.snapshots.is_empty() {
        let mut rows = Vec::new();
        for snap in &report.snapshots {
            let state = StateVector::from_amplitudes(
                grid,
                report.final_state.particles().to_vec(),
                snap.density
                    .iter()
                    .map(|p| Complex64::new(p.sqrt(), 0.0))
                    .collect(),
            )?;
            for e in 0..electrons {
                for (m, p) in state.marginal_density(e)?.iter().enumerate() {
                    rows.push(vec![
                        snap.step.to_string(),
                        num(snap.time),
                        e.to_string(),
                        (m / cells).to_string(),
                        (m % cells).to_string(),
                        num(*p),
                    ]);
                }
            }
        }
        out.write_csv(
            "snapshots.csv",
            &["step", "time", "electron", "ix", "iy", "probability"],
            &rows,
        )?;
    }

    let value = json!({
        "experiment": cfg.experiment.name(),
        "qubits_per_axis": n,
        "total_time": cfg.total_time,
        "steps": cfg.steps,
        "max_norm_drift": report.max_norm_drift(),
        "electrons": per_electron,
    });
    out.write_json("summary.json", &value)?;
    Ok(value)
}

pub fn sample(cfg: &RunConfig, out: &mut RunOutput) -> Result<Value, RunError> {
    let grid = cfg.grid()?;
    let particles = cfg.particle_specs();
    let quantum = particles
        .iter()
        .find(|p| p.is_quantum())
        .cloned()
        .ok_or_else(|| RunError::Config("no quantum particle".into()))?;
    let mut state = initial_state(&grid, &quantum, &cfg.initial_state, cfg.interior_only)?;
    if cfg.total_time > 0.0 {
        let plan = cfg.plan()?;
        let ops = PreparedOperators::new(&grid, &particles, &plan, cfg.wall_height)?;
        state = evolve(state, &plan, &ops)?.final_state;
    }
    let hist = sample_configurations(&state, cfg.shots, cfg.seed)?;
    let density = state.density();
    let rows: Vec<Vec<String>> = hist
        .counts
        .iter()
        .map(|(m, c)| vec![m.to_string(), c.to_string()])
        .collect();
    out.write_csv("histogram.csv", &["configuration", "count"], &rows)?;
    let value = json!({
        "experiment": cfg.experiment.name(),
        "shots": cfg.shots,
        "seed": cfg.seed,
        "states": density.len(),
        "tv_distance": hist.tv_distance(&density),
    });
    out.write_json("summary.json", &value)?;
    Ok(value)
}

/// The diagonal pattern `(θ1, θ2, θ3, θ4, θ3, θ4, θ1, θ2)`.
pub fn redundant_phases(t: [f64; 4]) -> Vec<f64> {
    vec![t[0], t[1], t[2], t[3], t[2], t[3], t[0], t[1]]
}

pub fn synth_report(cfg: &RunConfig, out: &mut RunOutput) -> Result<Value, RunError> {
    let mut rows = Vec::new();
    for &particles in &cfg.gate_count_particles {
        for &n in &cfg.gate_count_qubits {
            let trotter = count_kinetic_gates(particles, n, KineticMethod::Trotter)?;
            let spectral = count_kinetic_gates(particles, n, KineticMethod::Spectral)?;
            rows.push(vec![
                particles.to_string(),
                n.to_string(),
                trotter.to_string(),
                spectral.to_string(),
            ]);
        }
    }
    out.write_csv(
        "gate_counts.csv",
        &["particles", "n", "trotter_gates", "spectral_gates"],
        &rows,
    )?;

    let phases = redundant_phases(cfg.redundant_angles);
    let circuit = synthesize_diagonal(&phases)?;
    let naive = synthesize_diagonal_naive(&phases)?;
    out.write("redundant_circuit.txt", circuit.to_string().as_bytes())?;
    out.write("redundant_naive_circuit.txt", naive.to_string().as_bytes())?;
    let value = json!({
        "experiment": cfg.experiment.name(),
        "redundant_angles": cfg.redundant_angles,
        "controlled_phase_gates": circuit.controlled_phase_count(),
        "naive_controlled_phase_gates": naive.controlled_phase_count(),
        "total_gates": circuit.gates.len(),
        "naive_total_gates": naive.gates.len(),
        "max_entry_error": diagonal_error(&circuit, &phases)?,
    });
    out.write_json("summary.json", &value)?;
    Ok(value)
}
