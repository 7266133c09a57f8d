//! Diagonal unitaries as circuits of X, CNOT and (controlled) single-qubit
//! phase gates.
//!
//! Qubit 0 is the most significant bit of a basis index, matching the
//! big-endian register layout of [`crate::grid`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::KineticMethod;
use crate::potential::{antidiagonal_mismatch, DiagonalOperator};

/// Largest circuit width [`circuit_unitary`] will expand densely.
pub const MAX_DENSE_WIDTH: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X {
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// `diag(e^{iθa}, e^{iθb})` on `target`.
    Phase {
        target: usize,
        theta: (f64, f64),
    },
    /// Phase pair on `target`, applied when every control qubit is 1.
    ControlledPhase {
        controls: Vec<usize>,
        target: usize,
        theta: (f64, f64),
    },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::X { target } | Gate::Phase { target, .. } => vec![*target],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::ControlledPhase {
                controls, target, ..
            } => {
                let mut q = controls.clone();
                q.push(*target);
                q
            }
        }
    }

    pub fn is_phase(&self) -> bool {
        matches!(self, Gate::Phase { .. } | Gate::ControlledPhase { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qubits = gate.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.width {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    limit: self.width,
                });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::invalid(format!("qubit {q} used twice in one gate")));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Number of phase gates (controlled or not).
    pub fn phase_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_phase()).count()
    }

    pub fn controlled_phase_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::ControlledPhase { .. }))
            .count()
    }

    /// Apply every gate in order to a state of length `2^width`.
    pub fn apply(&self, state: &mut [Complex64]) -> Result<()> {
        if state.len() != 1usize << self.width {
            return Err(Error::DimensionMismatch {
                expected: 1usize << self.width,
                actual: state.len(),
            });
        }
        let bit = |q: usize| 1usize << (self.width - 1 - q);
        for gate in &self.gates {
            match gate {
                Gate::X { target } => {
                    let t = bit(*target);
                    for m in 0..state.len() {
                        if m & t == 0 {
                            state.swap(m, m | t);
                        }
                    }
                }
                Gate::Cnot { control, target } => {
                    let (c, t) = (bit(*control), bit(*target));
                    for m in 0..state.len() {
                        if m & c != 0 && m & t == 0 {
                            state.swap(m, m | t);
                        }
                    }
                }
                Gate::Phase { target, theta } => {
                    let t = bit(*target);
                    let (a, b) = (
                        Complex64::from_polar(1.0, theta.0),
                        Complex64::from_polar(1.0, theta.1),
                    );
                    for (m, v) in state.iter_mut().enumerate() {
                        *v *= if m & t == 0 { a } else { b };
                    }
                }
                Gate::ControlledPhase {
                    controls,
                    target,
                    theta,
                } => {
                    let mask: usize = controls.iter().map(|&q| bit(q)).sum();
                    let t = bit(*target);
                    let (a, b) = (
                        Complex64::from_polar(1.0, theta.0),
                        Complex64::from_polar(1.0, theta.1),
                    );
                    for (m, v) in state.iter_mut().enumerate() {
                        if m & mask == mask {
                            *v *= if m & t == 0 { a } else { b };
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dense unitary of a circuit, built column by column.
pub fn circuit_unitary(circuit: &Circuit) -> Result<DMatrix<Complex64>> {
    if circuit.width > MAX_DENSE_WIDTH {
        return Err(Error::guard(format!(
            "dense unitary limited to {MAX_DENSE_WIDTH} qubits, got {}",
            circuit.width
        )));
    }
    let dim = 1usize << circuit.width;
    let mut u = DMatrix::zeros(dim, dim);
    let mut col = vec![Complex64::default(); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|v| *v = Complex64::default());
        col[j] = Complex64::new(1.0, 0.0);
        circuit.apply(&mut col)?;
        for (i, v) in col.iter().enumerate() {
            u[(i, j)] = *v;
        }
    }
    Ok(u)
}

fn width_of(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::invalid(format!(
            "diagonal length must be a power of two, got {len}"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Phase-only structure `θ[m] = f(parity of the control bits in `subset`, last bit)`.
#[derive(Debug, Clone, PartialEq)]
struct ParityPattern {
    /// Control qubits whose XOR selects the phase pair.
    subset: Vec<usize>,
    /// Phase pairs for parity 0 and parity 1.
    pairs: [(f64, f64); 2],
}

fn find_parity_pattern(phases: &[f64], width: usize) -> Option<ParityPattern> {
    let controls = width - 1;
    let bit = |m: usize, q: usize| (m >> (width - 1 - q)) & 1;
    // smallest subsets first so the cheapest circuit wins
    let mut masks: Vec<usize> = (0..1usize << controls).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    'masks: for mask in masks {
        let subset: Vec<usize> = (0..controls)
            .filter(|q| mask >> (controls - 1 - q) & 1 == 1)
            .collect();
        let mut pairs: [[Option<f64>; 2]; 2] = [[None; 2]; 2];
        for (m, &theta) in phases.iter().enumerate() {
            let parity = subset.iter().map(|&q| bit(m, q)).sum::<usize>() & 1;
            let slot = &mut pairs[parity][m & 1];
            match slot {
                None => *slot = Some(theta),
                Some(v) if *v == theta => {}
                Some(_) => continue 'masks,
            }
        }
        let get = |p: usize, b: usize| pairs[p][b].unwrap_or(0.0);
        return Some(ParityPattern {
            subset,
            pairs: [(get(0, 0), get(0, 1)), (get(1, 0), get(1, 1))],
        });
    }
    None
}

/// Circuit implementing `diag(e^{iθ_0}, ..., e^{iθ_{2^w - 1}})`.
///
/// If the phases depend only on the parity of some subset of the leading
/// qubits together with the last qubit, the parity is computed into one
/// qubit with CNOTs and two controlled phase gates (one behind X gates)
/// finish the job. Otherwise every control pattern of the leading qubits
/// gets its own multi-controlled phase gate on the last qubit.
pub fn synthesize_diagonal(phases: &[f64]) -> Result<Circuit> {
    let width = width_of(phases.len())?;
    if width == 0 {
        return Err(Error::invalid(
            "a diagonal needs at least one qubit (length >= 2)",
        ));
    }
    if phases.iter().all(|&t| t == 0.0) {
        return Ok(Circuit::new(width));
    }
    match find_parity_pattern(phases, width) {
        Some(pattern) => parity_circuit(width, &pattern),
        None => synthesize_diagonal_naive(phases),
    }
}

fn parity_circuit(width: usize, pattern: &ParityPattern) -> Result<Circuit> {
    let target = width - 1;
    let mut c = Circuit::new(width);
    let [even, odd] = pattern.pairs;
    let Some((&pivot, rest)) = pattern.subset.split_last() else {
        c.push(Gate::Phase {
            target,
            theta: even,
        })?;
        return Ok(c);
    };
    for &q in rest {
        c.push(Gate::Cnot {
            control: q,
            target: pivot,
        })?;
    }
    c.push(Gate::ControlledPhase {
        controls: vec![pivot],
        target,
        theta: odd,
    })?;
    c.push(Gate::X { target: pivot })?;
    c.push(Gate::ControlledPhase {
        controls: vec![pivot],
        target,
        theta: even,
    })?;
    c.push(Gate::X { target: pivot })?;
    for &q in rest.iter().rev() {
        c.push(Gate::Cnot {
            control: q,
            target: pivot,
        })?;
    }
    Ok(c)
}

/// Leading qubits as controls: one phase gate on the last qubit per control
/// pattern, with X gates selecting the zero-valued controls. Patterns whose
/// phase pair is `(0, 0)` are skipped.
pub fn synthesize_diagonal_naive(phases: &[f64]) -> Result<Circuit> {
    let width = width_of(phases.len())?;
    if width == 0 {
        return Err(Error::invalid(
            "a diagonal needs at least one qubit (length >= 2)",
        ));
    }
    let target = width - 1;
    let mut c = Circuit::new(width);
    if width == 1 {
        if phases.iter().any(|&t| t != 0.0) {
            c.push(Gate::Phase {
                target,
                theta: (phases[0], phases[1]),
            })?;
        }
        return Ok(c);
    }
    let controls: Vec<usize> = (0..target).collect();
    for pattern in 0..1usize << target {
        let theta = (phases[2 * pattern], phases[2 * pattern + 1]);
        if theta == (0.0, 0.0) {
            continue;
        }
        let zeros: Vec<usize> = controls
            .iter()
            .copied()
            .filter(|&q| (pattern >> (target - 1 - q)) & 1 == 0)
            .collect();
        for &q in &zeros {
            c.push(Gate::X { target: q })?;
        }
        c.push(Gate::ControlledPhase {
            controls: controls.clone(),
            target,
            theta,
        })?;
        for &q in &zeros {
            c.push(Gate::X { target: q })?;
        }
    }
    Ok(c)
}

/// Largest entry-wise deviation of `circuit_unitary(circuit)` from `diag(e^{iθ})`.
pub fn diagonal_error(circuit: &Circuit, phases: &[f64]) -> Result<f64> {
    let u = circuit_unitary(circuit)?;
    if u.nrows() != phases.len() {
        return Err(Error::DimensionMismatch {
            expected: phases.len(),
            actual: u.nrows(),
        });
    }
    let mut worst = 0.0f64;
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            let target = if i == j {
                Complex64::from_polar(1.0, phases[i])
            } else {
                Complex64::default()
            };
            worst = worst.max((u[(i, j)] - target).norm());
        }
    }
    Ok(worst)
}

/// First half of an antidiagonally symmetric diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedDiagonal {
    pub half: Vec<f64>,
}

impl FoldedDiagonal {
    pub fn full_len(&self) -> usize {
        2 * self.half.len()
    }

    /// Rebuild the full diagonal using `E[dim-1-x] = E[x]`.
    pub fn unfold(&self) -> Vec<f64> {
        self.half
            .iter()
            .chain(self.half.iter().rev())
            .copied()
            .collect()
    }
}

pub fn antidiagonal_fold(diag: &DiagonalOperator) -> Result<FoldedDiagonal> {
    if !diag.len().is_multiple_of(2) {
        return Err(Error::invalid("folding needs an even-length diagonal"));
    }
    if let Some(index) = antidiagonal_mismatch(diag) {
        return Err(Error::NotAntidiagonalSymmetric { index });
    }
    Ok(FoldedDiagonal {
        half: diag.energies[..diag.len() / 2].to_vec(),
    })
}

/// Gate count of the kinetic propagator for `particles` particles in three
/// dimensions: `3N 2^n` for the block product, `3N (2^n + n(n+1)/2)` with
/// the textbook QFT count for the spectral method.
pub fn count_kinetic_gates(
    particles: u64,
    qubits_per_axis: u32,
    method: KineticMethod,
) -> Result<u64> {
    if particles == 0 || qubits_per_axis == 0 {
        return Err(Error::invalid(
            "particle count and qubits per axis must be positive",
        ));
    }
    if qubits_per_axis > 60 {
        return Err(Error::guard(
            "qubits per axis too large for a 64-bit gate count",
        ));
    }
    let n = qubits_per_axis as u64;
    let per_register = match method {
        KineticMethod::Trotter => 1u64 << n,
        KineticMethod::Spectral => (1u64 << n) + n * (n + 1) / 2,
    };
    per_register
        .checked_mul(3 * particles)
        .ok_or_else(|| Error::guard("gate count overflows u64"))
}

// Line-oriented text: `KIND target [control] [theta_a theta_b]`.
// Multi-controlled phases list their controls comma-separated.

fn fmt_angle(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::X { target } => write!(f, "X {target}"),
            Gate::Cnot { control, target } => write!(f, "CNOT {target} {control}"),
            Gate::Phase { target, theta } => {
                write!(
                    f,
                    "PHASE {target} {} {}",
                    fmt_angle(theta.0),
                    fmt_angle(theta.1)
                )
            }
            Gate::ControlledPhase {
                controls,
                target,
                theta,
            } => {
                let cs: Vec<String> = controls.iter().map(|c| c.to_string()).collect();
                write!(
                    f,
                    "CPHASE {target} {} {} {}",
                    cs.join(","),
                    fmt_angle(theta.0),
                    fmt_angle(theta.1)
                )
            }
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WIDTH {}", self.width)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    tok.ok_or_else(|| Error::invalid(format!("line {line}: missing qubit index")))?
        .parse()
        .map_err(|e| Error::invalid(format!("line {line}: {e}")))
}

fn parse_angle(tok: Option<&str>, line: usize) -> Result<f64> {
    tok.ok_or_else(|| Error::invalid(format!("line {line}: missing angle")))?
        .parse()
        .map_err(|e| Error::invalid(format!("line {line}: {e}")))
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut circuit: Option<Circuit> = None;
        for (no, raw) in s.lines().enumerate() {
            let line = no + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut toks = text.split_whitespace();
            let kind = toks.next().unwrap_or_default();
            if kind == "WIDTH" {
                circuit = Some(Circuit::new(parse_usize(toks.next(), line)?));
                continue;
            }
            let c = circuit
                .as_mut()
                .ok_or_else(|| Error::invalid("circuit text must start with a WIDTH line"))?;
            let gate = match kind {
                "X" => Gate::X {
                    target: parse_usize(toks.next(), line)?,
                },
                "CNOT" => {
                    let target = parse_usize(toks.next(), line)?;
                    Gate::Cnot {
                        control: parse_usize(toks.next(), line)?,
                        target,
                    }
                }
                "PHASE" => Gate::Phase {
                    target: parse_usize(toks.next(), line)?,
                    theta: (
                        parse_angle(toks.next(), line)?,
                        parse_angle(toks.next(), line)?,
                    ),
                },
                "CPHASE" => {
                    let target = parse_usize(toks.next(), line)?;
                    let controls = toks
                        .next()
                        .ok_or_else(|| Error::invalid(format!("line {line}: missing controls")))?
                        .split(',')
                        .map(|t| parse_usize(Some(t), line))
                        .collect::<Result<Vec<_>>>()?;
                    Gate::ControlledPhase {
                        controls,
                        target,
                        theta: (
                            parse_angle(toks.next(), line)?,
                            parse_angle(toks.next(), line)?,
                        ),
                    }
                }
                other => {
                    return Err(Error::invalid(format!(
                        "line {line}: unknown gate {other:?}"
                    )))
                }
            };
            if toks.next().is_some() {
                return Err(Error::invalid(format!("line {line}: trailing tokens")));
            }
            c.push(gate)?;
        }
        circuit.ok_or_else(|| Error::invalid("empty circuit text"))
    }
}
