//! Quantum Fourier transform on a single axis register.
//!
//! `F = D^{-1/2} Σ_{j,k} e^{+i 2π jk / D} |j⟩⟨k|`, i.e. the positive-exponent
//! convention. This is rustfft's "inverse" direction scaled to be unitary.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Qft {
    len: usize,
    scale: f64,
    positive: Arc<dyn Fft<f64>>,
    negative: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Qft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Qft").field("len", &self.len).finish()
    }
}

impl Qft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "QFT length must be a power of two, got {len}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Qft {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            positive: planner.plan_fft_inverse(len),
            negative: planner.plan_fft_forward(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scratch_len(&self) -> usize {
        self.positive
            .get_inplace_scratch_len()
            .max(self.negative.get_inplace_scratch_len())
    }

    /// Apply `F` in place. `buf.len()` must equal the transform length.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.positive.process_with_scratch(buf, scratch);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Apply `F†` in place.
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.negative.process_with_scratch(buf, scratch);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// `F v` for a register vector of power-of-two length.
pub fn qft(values: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Qft::new(values.len())?;
    let mut out = values.to_vec();
    let mut scratch = vec![Complex64::default(); plan.scratch_len()];
    plan.forward(&mut out, &mut scratch);
    Ok(out)
}

/// `F† v`, the inverse of [`qft`].
pub fn iqft(values: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Qft::new(values.len())?;
    let mut out = values.to_vec();
    let mut scratch = vec![Complex64::default(); plan.scratch_len()];
    plan.inverse(&mut out, &mut scratch);
    Ok(out)
}
