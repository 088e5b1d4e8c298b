//! Monte Carlo simulation of adaptive dyne phase measurements with a delay
//! in the feedback loop.
//!
//! A coherent signal of amplitude `alpha` is measured over the unit time
//! interval. Each step produces a photocurrent increment
//! `I dv = 2 Re(alpha e^{-i Phi}) dv + dW`, accumulated into the record
//! functionals `A`, `B` and `C = A v + B A*`. The local-oscillator phase `Phi`
//! is set by a [`FeedbackScheme`] that only sees data `d` steps old. The
//! [`stats`] module runs ensembles and delay sweeps, [`theory`] holds the
//! closed-form limits, and [`linearized`] integrates the small-angle delayed
//! equation of the simplified mark I scheme.

// Validation is written as `!(x >= 0.0)` on purpose: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod feedback;
pub mod linearized;
pub mod sim;
pub mod stats;
pub mod theory;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use estimators::{DyneRecord, EstimateSet, Estimator};
pub use feedback::{FeedbackController, FeedbackScheme, FeedbackState, SimplifiedClock};
pub use sim::{NoiseStream, SignalModel, TimeGrid};
pub use stats::{EnsembleConfig, EnsembleSummary, EstimatorStats, SweepPoint};
pub use trajectory::{run_trajectory, simulate, StepRecord, TrajectoryParams, TrajectoryResult};
