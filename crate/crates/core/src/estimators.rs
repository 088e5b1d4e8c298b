//! Sufficient statistics of the dyne record and the phase estimates built
//! from them.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Running `A_v`, `B_v` and the elapsed scaled time `v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DyneRecord {
    pub a: Complex64,
    pub b: Complex64,
    pub v: f64,
}

impl DyneRecord {
    pub fn new(a: Complex64, b: Complex64, v: f64) -> Self {
        Self { a, b, v }
    }

    pub fn c(&self) -> Complex64 {
        combine_c(self)
    }
}

/// One left-point step: `A += I dv e^{i Phi}`, `B -= e^{2 i Phi} dv`.
#[inline]
pub fn accumulate(record: &DyneRecord, i_dv: f64, lo_phase: f64, dv: f64) -> DyneRecord {
    let (s, c) = lo_phase.sin_cos();
    accumulate_rotor(record, i_dv, Complex64::new(c, s), dv)
}

/// [`accumulate`] with `e^{i Phi}` already evaluated.
#[inline]
pub(crate) fn accumulate_rotor(
    record: &DyneRecord,
    i_dv: f64,
    rotor: Complex64,
    dv: f64,
) -> DyneRecord {
    DyneRecord {
        a: record.a + rotor * i_dv,
        b: record.b - rotor * rotor * dv,
        v: record.v + dv,
    }
}

/// `C_v = A_v v + B_v A_v^*`.
#[inline]
pub fn combine_c(record: &DyneRecord) -> Complex64 {
    record.a * record.v + record.b * record.a.conj()
}

/// Phase between `arg A` and `arg C`, weighted `eps` towards `arg A`.
///
/// `A^eps C^(1-eps)` is branch-ambiguous for fractional `eps`, so the angles
/// are blended linearly after `arg A` is moved within pi of `arg C`.
pub fn epsilon_estimate(record: &DyneRecord, eps: f64) -> Result<f64> {
    if record.a == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedEstimate("A"));
    }
    let c = combine_c(record);
    if c_vanishes(record, c) {
        return Err(Error::UndefinedEstimate("C"));
    }
    blend(record.a, c, eps)
}

/// `C` cancels exactly after a single step (and nearly so early in a
/// heterodyne dead time); below this level its phase is rounding noise.
pub fn c_vanishes(record: &DyneRecord, c: Complex64) -> bool {
    c.norm() <= 1e-12 * record.a.norm() * (record.v + record.b.norm())
}

fn blend(a: Complex64, c: Complex64, eps: f64) -> Result<f64> {
    if a == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedEstimate("A"));
    }
    if c == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedEstimate("C"));
    }
    let arg_c = c.arg();
    let arg_a = arg_c + wrap_phase(a.arg() - arg_c);
    Ok(wrap_phase(eps * arg_a + (1.0 - eps) * arg_c))
}

/// Time-dependent weight `(v^2 - |B|^2) / |C| * sqrt(v / (1 - v))`, clamped
/// to `[0, 1]`.
pub fn variable_epsilon(record: &DyneRecord) -> Result<f64> {
    let v = record.v;
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::EpsilonEndpoint { v });
    }
    let c = combine_c(record);
    let c_abs = c.norm();
    if c_abs == 0.0 || c_vanishes(record, c) {
        return Err(Error::UndefinedEstimate("C"));
    }
    let eps = (v * v - record.b.norm_sqr()) / c_abs * (v / (1.0 - v)).sqrt();
    Ok(eps.clamp(0.0, 1.0))
}

/// Final estimates of one trajectory. `None` marks an undefined estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet {
    /// Final intermediate (feedback) estimate, the mark I estimate.
    pub feedback_final: Option<f64>,
    pub arg_a: Option<f64>,
    /// Best estimate, the mark II estimate.
    pub arg_c: Option<f64>,
}

impl EstimateSet {
    pub fn get(&self, which: Estimator) -> Option<f64> {
        match which {
            Estimator::Feedback => self.feedback_final,
            Estimator::ArgA => self.arg_a,
            Estimator::ArgC => self.arg_c,
        }
    }
}

/// Which final estimate to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Feedback,
    ArgA,
    ArgC,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Feedback, Estimator::ArgA, Estimator::ArgC];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Feedback => "feedback",
            Estimator::ArgA => "arg_a",
            Estimator::ArgC => "arg_c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feedback" | "phi_hat" => Some(Estimator::Feedback),
            "arg_a" => Some(Estimator::ArgA),
            "arg_c" => Some(Estimator::ArgC),
            _ => None,
        }
    }
}

fn checked_arg(z: Complex64) -> Option<f64> {
    (z != Complex64::new(0.0, 0.0)).then(|| wrap_phase(z.arg()))
}

/// Collect the three final estimates, all wrapped to `(-pi, pi]`.
pub fn finalize(record: &DyneRecord, feedback_final: Option<f64>) -> EstimateSet {
    EstimateSet {
        feedback_final: feedback_final.map(wrap_phase),
        arg_a: checked_arg(record.a),
        arg_c: checked_arg(combine_c(record)),
    }
}
