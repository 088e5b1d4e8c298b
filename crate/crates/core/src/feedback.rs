//! Local-oscillator phase policies.
//!
//! Every policy sees the measurement only through the delay line: at step
//! `k` the newest datum available was published at step `k - d`. Until the
//! first datum arrives the local oscillator is rotated by a quarter turn per
//! step (heterodyne dead time).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{c_vanishes, epsilon_estimate, variable_epsilon, wrap_phase, DyneRecord};
use crate::sim::{Delayed, TimeGrid};

/// Feedback policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackScheme {
    /// Quarter-turn rotation for the whole measurement.
    Heterodyne,
    /// `dPhi = I dv / sqrt(v)`.
    Simplified,
    /// `dPhi = I dv / sqrt(v + alpha tau)`.
    CorrectedSimplified,
    /// `Phi = arg A + pi/2`.
    ArgA,
    /// `Phi` from the constant-weight blend of `arg A` and `arg C`.
    ConstEps(f64),
    /// `Phi` from the time-dependent-weight blend.
    VarEps,
}

impl FeedbackScheme {
    pub fn const_eps(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in [0, 1], got {eps}")));
        }
        Ok(FeedbackScheme::ConstEps(eps))
    }

    pub fn has_intermediate_estimate(&self) -> bool {
        !matches!(self, FeedbackScheme::Heterodyne)
    }
}

impl fmt::Display for FeedbackScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackScheme::Heterodyne => f.write_str("heterodyne"),
            FeedbackScheme::Simplified => f.write_str("simplified"),
            FeedbackScheme::CorrectedSimplified => f.write_str("corrected_simplified"),
            FeedbackScheme::ArgA => f.write_str("arg_a"),
            FeedbackScheme::ConstEps(eps) => write!(f, "const_eps:{eps}"),
            FeedbackScheme::VarEps => f.write_str("var_eps"),
        }
    }
}

impl FromStr for FeedbackScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "heterodyne" => Ok(FeedbackScheme::Heterodyne),
            "simplified" => Ok(FeedbackScheme::Simplified),
            "corrected_simplified" => Ok(FeedbackScheme::CorrectedSimplified),
            "arg_a" => Ok(FeedbackScheme::ArgA),
            "var_eps" => Ok(FeedbackScheme::VarEps),
            _ => match s.strip_prefix("const_eps:") {
                Some(eps) => {
                    let eps: f64 = eps.trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad epsilon in scheme {s:?}"))
                    })?;
                    FeedbackScheme::const_eps(eps)
                }
                None => Err(Error::InvalidConfig(format!("unknown feedback scheme {s:?}"))),
            },
        }
    }
}

/// Which time enters the `1/sqrt(v)` gain of the simplified schemes under delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimplifiedClock {
    /// Current time `v_k`.
    #[default]
    Current,
    /// Time at which the delayed datum was completed, `v_{k-d+1}`.
    Delayed,
}

impl FromStr for SimplifiedClock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "current" => Ok(SimplifiedClock::Current),
            "delayed" => Ok(SimplifiedClock::Delayed),
            other => Err(Error::InvalidConfig(format!("unknown simplified clock {other:?}"))),
        }
    }
}

/// Datum sent through the delay line after every step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Published {
    /// Photocurrent increment `I dv` of the step.
    pub i_dv: f64,
    /// Record including the step.
    pub record: DyneRecord,
}

/// Controller state after choosing the phase of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackState {
    /// Local-oscillator phase `Phi`, unwrapped.
    pub lo_phase: f64,
    /// `Phi - pi/2`, unwrapped.
    pub intermediate_estimate: f64,
    /// Blend weight last used (`NaN` for schemes without one).
    pub eps: f64,
}

impl FeedbackState {
    fn at(lo_phase: f64, eps: f64) -> Self {
        Self {
            lo_phase,
            intermediate_estimate: lo_phase - FRAC_PI_2,
            eps,
        }
    }
}

/// A feedback scheme bound to one measurement configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackController {
    pub scheme: FeedbackScheme,
    pub grid: TimeGrid,
    pub alpha: f64,
    pub delay_steps: usize,
    pub clock: SimplifiedClock,
}

impl FeedbackController {
    pub fn new(scheme: FeedbackScheme, grid: TimeGrid, alpha: f64, delay_steps: usize) -> Self {
        Self {
            scheme,
            grid,
            alpha,
            delay_steps,
            clock: SimplifiedClock::default(),
        }
    }

    pub fn with_clock(mut self, clock: SimplifiedClock) -> Self {
        self.clock = clock;
        self
    }

    /// State for step 0, which always falls in the dead time.
    pub fn initial_state(&self, initial_lo_phase: f64) -> FeedbackState {
        let eps = match self.scheme {
            FeedbackScheme::ConstEps(eps) => eps,
            FeedbackScheme::VarEps => 1.0,
            _ => f64::NAN,
        };
        FeedbackState::at(initial_lo_phase, eps)
    }

    /// Phase for `step` (>= 1) given the previous state and the delayed datum.
    pub fn next_phase(
        &self,
        state: &FeedbackState,
        delayed: Delayed<&Published>,
        step: usize,
    ) -> Result<FeedbackState> {
        let datum = match delayed {
            Delayed::DeadTime if step < self.delay_steps => {
                return Ok(FeedbackState::at(state.lo_phase + FRAC_PI_2, state.eps))
            }
            Delayed::DeadTime => {
                return Err(Error::ProtocolViolation {
                    step,
                    reason: "missing delayed datum after dead time",
                })
            }
            Delayed::Datum { stamp, value } => {
                if stamp + self.delay_steps != step {
                    return Err(Error::ProtocolViolation {
                        step,
                        reason: "datum carries the wrong timestamp",
                    });
                }
                value
            }
        };
        let dv = self.grid.dv();
        let next = match self.scheme {
            FeedbackScheme::Heterodyne => FeedbackState::at(state.lo_phase + FRAC_PI_2, state.eps),
            FeedbackScheme::Simplified => {
                let v = match self.clock {
                    SimplifiedClock::Current => self.grid.time(step),
                    SimplifiedClock::Delayed => self.grid.time(step + 1 - self.delay_steps),
                };
                FeedbackState::at(state.lo_phase + datum.i_dv / v.sqrt(), state.eps)
            }
            FeedbackScheme::CorrectedSimplified => {
                let tau = self.delay_steps as f64 * dv;
                let v = self.grid.time(step) + self.alpha * tau;
                FeedbackState::at(state.lo_phase + datum.i_dv / v.sqrt(), state.eps)
            }
            FeedbackScheme::ArgA => {
                let a = datum.record.a;
                if a.norm_sqr() == 0.0 {
                    *state
                } else {
                    FeedbackState::at(a.arg() + FRAC_PI_2, state.eps)
                }
            }
            FeedbackScheme::ConstEps(eps) => match blended(&datum.record, eps) {
                Some(est) => FeedbackState::at(est + FRAC_PI_2, eps),
                None => *state,
            },
            FeedbackScheme::VarEps => {
                let eps = variable_epsilon(&datum.record).unwrap_or(state.eps);
                match blended(&datum.record, eps) {
                    Some(est) => FeedbackState::at(est + FRAC_PI_2, eps),
                    None => FeedbackState { eps, ..*state },
                }
            }
        };
        Ok(next)
    }

    /// Current intermediate phase estimate, wrapped to `(-pi, pi]`.
    pub fn intermediate_estimate_of(&self, state: &FeedbackState) -> Result<f64> {
        if !self.scheme.has_intermediate_estimate() {
            return Err(Error::NoIntermediateEstimate);
        }
        Ok(wrap_phase(state.lo_phase - FRAC_PI_2))
    }
}

/// Blend, falling back to whichever of `arg A`, `arg C` is defined.
fn blended(record: &DyneRecord, eps: f64) -> Option<f64> {
    match epsilon_estimate(record, eps) {
        Ok(est) => Some(est),
        Err(Error::UndefinedEstimate("C")) => Some(record.a.arg()),
        Err(_) => {
            let c = record.c();
            (!c_vanishes(record, c)).then(|| c.arg())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn controller(scheme: FeedbackScheme, d: usize) -> FeedbackController {
        FeedbackController::new(scheme, TimeGrid::new(1024).unwrap(), 10.0, d)
    }

    fn datum(i_dv: f64, record: DyneRecord) -> Published {
        Published { i_dv, record }
    }

    #[test]
    fn heterodyne_rotates_by_quarter_turn() {
        let c = controller(FeedbackScheme::Heterodyne, 1);
        let s0 = c.initial_state(0.0);
        let p = datum(0.3, DyneRecord::default());
        let s = c.next_phase(&s0, Delayed::Datum { stamp: 4, value: &p }, 5).unwrap();
        assert!((s.lo_phase - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(c.intermediate_estimate_of(&s), Err(Error::NoIntermediateEstimate));
    }

    #[test]
    fn dead_time_rotates_every_scheme() {
        for scheme in [FeedbackScheme::Simplified, FeedbackScheme::ArgA, FeedbackScheme::VarEps] {
            let c = controller(scheme, 8);
            let mut s = c.initial_state(0.0);
            for k in 1..8 {
                s = c.next_phase(&s, Delayed::DeadTime, k).unwrap();
                assert!((s.lo_phase - k as f64 * FRAC_PI_2).abs() < 1e-12);
            }
            assert!(c.next_phase(&s, Delayed::DeadTime, 8).is_err());
        }
    }

    #[test]
    fn simplified_increment() {
        // v_k = 0.25 at step 256 of 1024
        let c = controller(FeedbackScheme::Simplified, 1);
        let s0 = c.initial_state(1.0);
        let p = datum(0.01, DyneRecord::default());
        let s = c.next_phase(&s0, Delayed::Datum { stamp: 255, value: &p }, 256).unwrap();
        assert!((s.lo_phase - 1.02).abs() < 1e-14);
    }

    #[test]
    fn simplified_clock_toggle() {
        let c = controller(FeedbackScheme::Simplified, 16).with_clock(SimplifiedClock::Delayed);
        let s0 = c.initial_state(0.0);
        let p = datum(0.01, DyneRecord::default());
        let s = c.next_phase(&s0, Delayed::Datum { stamp: 240, value: &p }, 256).unwrap();
        let v = 241.0 / 1024.0;
        assert!((s.lo_phase - 0.01 / f64::sqrt(v)).abs() < 1e-14);
    }

    #[test]
    fn corrected_simplified_increment() {
        let c = controller(FeedbackScheme::CorrectedSimplified, 64);
        let s0 = c.initial_state(0.0);
        let p = datum(0.01, DyneRecord::default());
        let s = c.next_phase(&s0, Delayed::Datum { stamp: 192, value: &p }, 256).unwrap();
        let v: f64 = 0.25 + 10.0 * 64.0 / 1024.0;
        assert!((s.lo_phase - 0.01 / v.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn arg_a_feedback() {
        let c = controller(FeedbackScheme::ArgA, 1);
        let rec = DyneRecord::new(Complex64::from_polar(1.0, 0.3), Complex64::new(0.0, 0.0), 0.5);
        let p = datum(0.0, rec);
        let s = c.next_phase(&c.initial_state(0.0), Delayed::Datum { stamp: 9, value: &p }, 10).unwrap();
        assert!((s.lo_phase - (0.3 + FRAC_PI_2)).abs() < 1e-15);
        assert!((c.intermediate_estimate_of(&s).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn estimate_from_phase() {
        let c = controller(FeedbackScheme::Simplified, 1);
        let s = FeedbackState::at(FRAC_PI_2, f64::NAN);
        assert_eq!(c.intermediate_estimate_of(&s).unwrap(), 0.0);
        let s = FeedbackState::at(FRAC_PI_2 + 0.2, f64::NAN);
        assert!((c.intermediate_estimate_of(&s).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn var_eps_reuses_previous_weight_at_endpoint() {
        let c = controller(FeedbackScheme::VarEps, 1);
        let rec = DyneRecord::new(Complex64::new(1.0, 0.2), Complex64::new(0.1, 0.0), 1.0);
        let p = datum(0.0, rec);
        let s0 = FeedbackState::at(0.0, 0.37);
        let s = c.next_phase(&s0, Delayed::Datum { stamp: 1023, value: &p }, 1024).unwrap();
        assert_eq!(s.eps, 0.37);
    }

    #[test]
    fn wrong_stamp_is_rejected() {
        let c = controller(FeedbackScheme::ArgA, 4);
        let p = Published::default();
        assert!(c.next_phase(&c.initial_state(0.0), Delayed::Datum { stamp: 3, value: &p }, 8).is_err());
    }

    #[test]
    fn scheme_labels_round_trip() {
        for s in [
            FeedbackScheme::Heterodyne,
            FeedbackScheme::Simplified,
            FeedbackScheme::CorrectedSimplified,
            FeedbackScheme::ArgA,
            FeedbackScheme::ConstEps(0.25),
            FeedbackScheme::VarEps,
        ] {
            assert_eq!(s.to_string().parse::<FeedbackScheme>().unwrap(), s);
        }
        assert!("const_eps:1.5".parse::<FeedbackScheme>().is_err());
        assert!("homodyne".parse::<FeedbackScheme>().is_err());
    }
}
