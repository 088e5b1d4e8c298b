//! Closed-form reference curves and squeezed-state bookkeeping.

mod quadrature;

pub use quadrature::{integrate, QuadResult};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Squeezed state `|beta, zeta>` associated with a measurement record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    pub beta: Complex64,
    pub zeta: Complex64,
}

/// Map final `(A, B)` at time `v` onto the squeezed state whose overlap with
/// the signal gives the record's likelihood: `zeta = -B atanh|B| / |B|` and
/// `beta = C / (1 - |B|^2)`.
///
/// With `|beta, zeta> = D(beta) S(zeta)|0>` the record state
/// `exp(A a^+ + B a^+^2 / 2)|0>` requires `A = beta - B beta^*`, whose
/// solution is the expression above. For real `B` it coincides with
/// `C / (1 - B^2)`; unlike that form it is covariant under a global phase
/// rotation.
pub fn squeeze_params(a: Complex64, b: Complex64, v: f64) -> Result<SqueezeParams> {
    let abs_b = b.norm();
    if !(abs_b < 1.0) {
        return Err(Error::SingularMapping { abs_b });
    }
    let c = a * v + b * a.conj();
    let beta = c / (1.0 - abs_b * abs_b);
    let zeta = if abs_b == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -b * (abs_b.atanh() / abs_b)
    };
    Ok(SqueezeParams { beta, zeta })
}

/// Mean photon number `|beta|^2 + sinh^2 |zeta|`.
pub fn squeezed_photon_number(p: &SqueezeParams) -> f64 {
    p.beta.norm_sqr() + p.zeta.norm().sinh().powi(2)
}

/// Phase variance of a squeezed state with photon number `n_p`:
/// `(n0 + 1) / (4 n_p^2) + 2 erfc(sqrt(2 n0))` with `n0 = n_p e^{2 zeta}`.
pub fn squeezed_phase_variance(n_p: f64, zeta_real: f64) -> f64 {
    let n0 = n_p * (2.0 * zeta_real).exp();
    (n0 + 1.0) / (4.0 * n_p * n_p) + 2.0 * libm::erfc((2.0 * n0).sqrt())
}

/// Weakly squeezed limit `e^{2 zeta} / (4 n_p)`.
pub fn squeezed_phase_variance_weak(n_p: f64, zeta_real: f64) -> f64 {
    (2.0 * zeta_real).exp() / (4.0 * n_p)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau == 0.0 {
        return Err(Error::NoDelayTheory { tau });
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

/// `e^{-2 atanh(1 - tau)}`, evaluated as the equivalent `tau / (2 - tau)`.
fn dead_time_factor(tau: f64) -> f64 {
    tau / (2.0 - tau)
}

/// Lower limit of the introduced phase variance under a delay `tau`:
/// `e^{-2 atanh(1 - tau)} / (4 n)`.
pub fn delay_limit(tau: f64, n_bar: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(n_bar > 0.0) {
        return Err(Error::InvalidConfig(format!("n_bar must be positive, got {n_bar}")));
    }
    Ok(dead_time_factor(tau) / (4.0 * n_bar))
}

/// Small-delay form `tau / (8 n)`.
pub fn delay_limit_asymptotic(tau: f64, n_bar: f64) -> f64 {
    tau / (8.0 * n_bar)
}

/// Introduced variance of heterodyne detection, `1 / (4 n)`.
pub fn heterodyne_var(n_bar: f64) -> f64 {
    1.0 / (4.0 * n_bar)
}

/// Introduced variance of mark II adaptive detection, `1 / (8 n^1.5)`.
pub fn mark_two_intro_var(n_bar: f64) -> f64 {
    1.0 / (8.0 * n_bar.powf(1.5))
}

/// Best achievable introduced variance without delay, `ln n / (4 n^2)`.
pub fn theory_limit_no_delay(n_bar: f64) -> f64 {
    n_bar.ln() / (4.0 * n_bar * n_bar)
}

/// Mark I variance with simplified feedback to first order in the delay,
/// `1 / (4 alpha) + tau / 2`.
pub fn mark_one_delay_var(alpha: f64, tau: f64) -> f64 {
    1.0 / (4.0 * alpha) + tau / 2.0
}

/// Lower limit using the ensemble mean of `1 / n_p` instead of `1 / n`.
pub fn corrected_limit(inv_n_mean: f64, tau: f64) -> f64 {
    0.25 * inv_n_mean * dead_time_factor(tau)
}

pub const DEFAULT_V1: f64 = 1e-4;

/// Correlation `<phi0(1) phi1(1)>` between the zeroth- and first-order
/// terms of the delayed mark I expansion:
///
/// `4 alpha int_{v1}^1 (ln u / u) e^{8 alpha (sqrt u - 1)} du
///  + int_{v1}^1 2 e^{8 alpha (sqrt u - 1)} / u^{3/2} du`.
///
/// Approaches `1 / (4 alpha)` for large `alpha`.
pub fn perturbation_quadrature(alpha: f64, v1: f64) -> Result<f64> {
    if !(alpha >= 10.0) {
        return Err(Error::InvalidConfig(format!("quadrature needs alpha >= 10, got {alpha}")));
    }
    if !(v1 > 0.0 && v1 < 1.0) {
        return Err(Error::InvalidConfig(format!("v1 must lie in (0, 1), got {v1}")));
    }
    let integrand = |u: f64| {
        let damp = (8.0 * alpha * (u.sqrt() - 1.0)).exp();
        damp * (4.0 * alpha * u.ln() / u + 2.0 / (u * u.sqrt()))
    };
    Ok(integrate(integrand, v1, 1.0, 1e-8, 0.0, 4000)?.value)
}

/// Mark I variance `1/(4 alpha) + 2 alpha tau <phi0 phi1>` with the
/// correlation from [`perturbation_quadrature`].
pub fn mark_one_delay_var_quadrature(alpha: f64, tau: f64, v1: f64) -> Result<f64> {
    Ok(1.0 / (4.0 * alpha) + 2.0 * alpha * tau * perturbation_quadrature(alpha, v1)?)
}
