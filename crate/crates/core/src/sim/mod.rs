//! Time grid, signal model and photocurrent synthesis.

mod delay;
mod noise;

pub use delay::{DelayLine, Delayed};
pub use noise::{derive_seed, wiener_increment, Increments, NoiseStream};

use crate::error::{Error, Result};

/// Uniform grid on the unit measurement interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    n_steps: usize,
}

impl TimeGrid {
    /// `n_steps` must be a power of two, at least 2.
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps < 2 || !n_steps.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_steps must be a power of two >= 2, got {n_steps}"
            )));
        }
        Ok(Self { n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dv(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    /// Scaled time at the start of `step`.
    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dv()
    }

    /// Delay of `delay_steps` in scaled time.
    pub fn tau(&self, delay_steps: usize) -> f64 {
        delay_steps as f64 * self.dv()
    }
}

/// Coherent-state signal of constant scaled amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pub alpha: f64,
    pub true_phase: f64,
}

impl SignalModel {
    pub fn new(alpha: f64, true_phase: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { alpha, true_phase })
    }

    pub fn n_bar(&self) -> f64 {
        self.alpha * self.alpha
    }
}

/// `I dv = 2 Re(alpha e^{-i Phi}) dv + dW` for a signal of phase `true_phase`.
#[inline]
pub fn photocurrent_increment(signal: &SignalModel, lo_phase: f64, dw: f64, dv: f64) -> f64 {
    2.0 * signal.alpha * (signal.true_phase - lo_phase).cos() * dv + dw
}
