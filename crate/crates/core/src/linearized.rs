//! Small-angle model of simplified mark I feedback with delay:
//! `dphi = v^{-1/2} [-2 alpha phi(v - tau) dv + dW]` on `[v1, 1]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{derive_seed, NoiseStream};
use crate::stats::{fit_line, LinearFit, MARK_ONE_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedConfig {
    pub alpha: f64,
    pub tau: f64,
    /// Start of the linearized regime.
    pub v1: f64,
    pub n_steps: usize,
    /// Variance of `phi(v1)`; the history on `[v1 - tau, v1]` is held at that draw.
    pub initial_variance: f64,
}

impl LinearizedConfig {
    pub const DEFAULT_V1: f64 = 0.01;

    /// Defaults: `v1 = 0.01`, initial variance `1 / (4 alpha)`.
    pub fn new(alpha: f64, tau: f64, n_steps: usize) -> Self {
        Self {
            alpha,
            tau,
            v1: Self::DEFAULT_V1,
            n_steps,
            initial_variance: if alpha > 0.0 { 0.25 / alpha } else { 0.0 },
        }
    }

    fn steps(&self) -> Result<(usize, usize)> {
        let n = self.n_steps as f64;
        if self.n_steps < 2 {
            return Err(Error::InvalidConfig("linearized model needs n_steps >= 2".into()));
        }
        if !(self.v1 > 0.0 && self.v1 < 1.0) {
            return Err(Error::InvalidConfig(format!("v1 must lie in (0, 1), got {}", self.v1)));
        }
        if !(self.tau >= 0.0 && self.tau < 1.0 - self.v1) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in [0, 1 - v1), got {}",
                self.tau
            )));
        }
        if !(self.alpha >= 0.0) || !(self.initial_variance >= 0.0) {
            return Err(Error::InvalidConfig("alpha and initial variance must be >= 0".into()));
        }
        let d = (self.tau * n).round();
        if (d - self.tau * n).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "tau = {} is not a whole number of steps of 1/{}",
                self.tau, self.n_steps
            )));
        }
        let k1 = (self.v1 * n).round().max(1.0) as usize;
        Ok((k1, d as usize))
    }
}

/// Euler-Maruyama path driven by `phi_v1` and the increments from `dw`.
pub fn simulate_linearized_with<W: FnMut() -> f64>(
    cfg: &LinearizedConfig,
    phi_v1: f64,
    mut dw: W,
) -> Result<f64> {
    let (k1, d) = cfg.steps()?;
    let dv = 1.0 / cfg.n_steps as f64;
    let gain = 2.0 * cfg.alpha * dv;
    let mut history = vec![phi_v1; d.max(1)];
    let mut phi = phi_v1;
    for k in k1..cfg.n_steps {
        let lagged = if d == 0 { phi } else { history[k % d] };
        let next = phi + (dw() - gain * lagged) / (k as f64 * dv).sqrt();
        if d > 0 {
            history[k % d] = phi;
        }
        phi = next;
    }
    Ok(phi)
}

/// `phi(1)` for one noise stream. The first normal of the stream sets
/// `phi(v1)`, the rest drive the path.
pub fn simulate_linearized(cfg: &LinearizedConfig, stream: &NoiseStream) -> Result<f64> {
    let mut z = stream.increments(1.0);
    let phi_v1 = cfg.initial_variance.sqrt() * z.next_increment();
    let sqrt_dv = (1.0 / cfg.n_steps as f64).sqrt();
    simulate_linearized_with(cfg, phi_v1, || sqrt_dv * z.next_increment())
}

/// Second moment of `phi(1)` about zero, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub std_error: f64,
    pub n: usize,
}

impl VarianceEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
        let mean = sq.iter().sum::<f64>() / n as f64;
        let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        Self {
            variance: mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }
}

pub fn linearized_ensemble(cfg: &LinearizedConfig, n_paths: usize, seed: u64) -> Result<VarianceEstimate> {
    if n_paths < 2 {
        return Err(Error::InvalidConfig("need at least two paths".into()));
    }
    cfg.steps()?;
    let finals = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_linearized(cfg, &NoiseStream::new(seed, i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(VarianceEstimate::from_samples(&finals))
}

/// Variance at each delay and the least-squares slope through them.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub taus: Vec<f64>,
    pub points: Vec<VarianceEstimate>,
    pub fit: LinearFit,
}

/// Fit variance against `tau` over the delays with `alpha tau <= 0.3`.
pub fn slope_vs_tau(base: &LinearizedConfig, taus: &[f64], n_paths: usize, seed: u64) -> Result<SlopeReport> {
    let usable: Vec<f64> = taus
        .iter()
        .copied()
        .filter(|t| base.alpha * t <= MARK_ONE_CUTOFF)
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientRange { usable: usable.len() });
    }
    let points = usable
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let cfg = LinearizedConfig { tau, ..*base };
            linearized_ensemble(&cfg, n_paths, derive_seed(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = points.iter().map(|p| p.variance).collect();
    let se: Vec<f64> = points.iter().map(|p| p.std_error).collect();
    let fit = fit_line(&usable, &ys, Some(&se))?;
    Ok(SlopeReport {
        taus: usable,
        points,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_free_variance_is_log() {
        let cfg = LinearizedConfig {
            initial_variance: 0.0,
            ..LinearizedConfig::new(0.0, 0.0, 1 << 14)
        };
        let est = linearized_ensemble(&cfg, 20_000, 3).unwrap();
        let exact = -(cfg.v1.ln());
        assert!((est.variance - exact).abs() < 3.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn sign_flip_symmetry() {
        let cfg = LinearizedConfig::new(100.0, 0.002, 20_000);
        let s = NoiseStream::new(4, 0);
        let plus: Vec<f64> = s.increments(1.0 / 20_000.0).take(20_000).collect();
        let a = simulate_linearized_with(&cfg, 0.03, {
            let mut it = plus.iter();
            move || *it.next().unwrap()
        })
        .unwrap();
        let b = simulate_linearized_with(&cfg, -0.03, {
            let mut it = plus.iter();
            move || -*it.next().unwrap()
        })
        .unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn no_delay_variance_for_two_amplitudes() {
        for alpha in [25.0, 100.0] {
            let cfg = LinearizedConfig::new(alpha, 0.0, 40_000);
            let est = linearized_ensemble(&cfg, 10_000, 5).unwrap();
            let target = 0.25 / alpha;
            assert!((est.variance - target).abs() < 3.0 * est.std_error, "alpha {alpha}: {est:?}");
        }
    }

    #[test]
    fn halving_the_step_barely_moves_the_variance() {
        // Same Brownian path on both grids: coarse increments are sums of
        // pairs of fine ones.
        let fine = LinearizedConfig::new(100.0, 0.0, 40_000);
        let coarse = LinearizedConfig { n_steps: 20_000, ..fine };
        let dv: f64 = 1.0 / 40_000.0;
        let n_paths = 4000;
        let mut f = Vec::with_capacity(n_paths);
        let mut c = Vec::with_capacity(n_paths);
        for i in 0..n_paths as u64 {
            let mut z = NoiseStream::new(12, i).increments(1.0);
            let phi0 = fine.initial_variance.sqrt() * z.next_increment();
            let incs: Vec<f64> = (0..40_000).map(|_| dv.sqrt() * z.next_increment()).collect();
            let mut it = incs.iter();
            f.push(simulate_linearized_with(&fine, phi0, || *it.next().unwrap()).unwrap());
            // coarse grid starts at step 200 of 20000, i.e. fine step 400
            let mut pairs = incs[400..].chunks(2).map(|p| p[0] + p[1]);
            c.push(simulate_linearized_with(&coarse, phi0, || pairs.next().unwrap()).unwrap());
        }
        let ef = VarianceEstimate::from_samples(&f);
        let ec = VarianceEstimate::from_samples(&c);
        assert!((ef.variance - ec.variance).abs() < ef.std_error, "{ef:?} {ec:?}");
    }

    #[test]
    fn history_initialisation_is_forgotten() {
        let base = LinearizedConfig::new(100.0, 0.001, 20_000);
        let dv = 1.0 / 20_000.0;
        for i in 0..50u64 {
            let incs: Vec<f64> = NoiseStream::new(13, i).increments(dv).take(20_000).collect();
            let run = |phi0: f64| {
                let mut it = incs.iter();
                simulate_linearized_with(&base, phi0, || *it.next().unwrap()).unwrap()
            };
            assert!((run(0.0) - run(0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(LinearizedConfig::new(100.0, 0.00013, 20_000).steps().is_err());
        assert!(LinearizedConfig::new(100.0, 0.995, 20_000).steps().is_err());
        let mut c = LinearizedConfig::new(100.0, 0.0, 20_000);
        c.v1 = 0.0;
        assert!(c.steps().is_err());
    }

    #[test]
    fn slope_needs_range() {
        let base = LinearizedConfig::new(100.0, 0.0, 20_000);
        assert_eq!(
            slope_vs_tau(&base, &[0.001], 10, 0),
            Err(Error::InsufficientRange { usable: 1 })
        );
        assert_eq!(
            slope_vs_tau(&base, &[0.0, 0.001, 0.004, 0.01], 10, 0),
            Err(Error::InsufficientRange { usable: 2 })
        );
    }
}
