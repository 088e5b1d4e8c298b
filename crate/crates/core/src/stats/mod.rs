//! Ensemble statistics and the delay-sweep protocol.

mod fit;

pub use fit::{fit_line, LinearFit};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{wrap_phase, Estimator};
use crate::feedback::{FeedbackScheme, SimplifiedClock};
use crate::sim::{derive_seed, NoiseStream, SignalModel, TimeGrid};
use crate::trajectory::{run_trajectory, TrajectoryParams, TrajectoryResult};

/// Holevo variance `|<e^{i theta}>|^{-2} - 1`.
pub fn holevo_variance(phases: &[f64]) -> Result<f64> {
    if phases.is_empty() {
        return Err(Error::InvalidConfig("no phases".into()));
    }
    let sum: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum();
    holevo_from_sum(sum, phases.len())
}

fn holevo_from_sum(sum: Complex64, n: usize) -> Result<f64> {
    let r2 = (sum / n as f64).norm_sqr();
    // cancellation leaves rounding residue of order 1e-16 in the mean
    if r2 < 1e-24 {
        return Err(Error::Unmeasurable);
    }
    Ok(1.0 / r2 - 1.0)
}

/// Spread of a set of phase estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseVariance {
    pub holevo: f64,
    /// Mean of `wrap(theta - true_phase)^2`.
    pub moment: f64,
    /// Jackknife standard error of `holevo`.
    pub std_error: f64,
    pub moment_std_error: f64,
    pub n: usize,
}

/// Holevo and wrapped-moment variances with standard errors.
pub fn phase_variance(phases: &[f64], true_phase: f64) -> Result<PhaseVariance> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least two phases, got {n}")));
    }
    let units: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let sum: Complex64 = units.iter().sum();
    let holevo = holevo_from_sum(sum, n)?;

    let mut loo = Vec::with_capacity(n);
    for u in &units {
        loo.push(holevo_from_sum(sum - u, n - 1)?);
    }
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let jack = loo.iter().map(|h| (h - loo_mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;

    let sq: Vec<f64> = phases.iter().map(|&p| wrap_phase(p - true_phase).powi(2)).collect();
    let moment = sq.iter().sum::<f64>() / n as f64;
    let sq_var = sq.iter().map(|s| (s - moment).powi(2)).sum::<f64>() / (n - 1) as f64;

    Ok(PhaseVariance {
        holevo,
        moment,
        std_error: jack.sqrt(),
        moment_std_error: (sq_var / n as f64).sqrt(),
        n,
    })
}

/// One ensemble: `n_traj` trajectories of a single configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub scheme: FeedbackScheme,
    pub alpha: f64,
    pub n_steps: usize,
    pub delay_steps: usize,
    pub true_phase: f64,
    pub clock: SimplifiedClock,
}

impl EnsembleConfig {
    pub fn new(
        scheme: FeedbackScheme,
        alpha: f64,
        n_steps: usize,
        delay_steps: usize,
        n_traj: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            n_traj,
            master_seed,
            scheme,
            alpha,
            n_steps,
            delay_steps,
            true_phase: 0.0,
            clock: SimplifiedClock::Current,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = TimeGrid::new(self.n_steps)?;
        if self.n_traj < 2 {
            return Err(Error::InvalidConfig(format!("n_traj must be >= 2, got {}", self.n_traj)));
        }
        if self.delay_steps < 1 || self.delay_steps > grid.n_steps() / 4 {
            return Err(Error::InvalidConfig(format!(
                "delay_steps must lie in [1, {}], got {}",
                grid.n_steps() / 4,
                self.delay_steps
            )));
        }
        SignalModel::new(self.alpha, self.true_phase)?;
        Ok(())
    }

    pub fn trajectory_params(&self) -> Result<TrajectoryParams> {
        self.validate()?;
        let mut p = TrajectoryParams::new(
            SignalModel::new(self.alpha, self.true_phase)?,
            TimeGrid::new(self.n_steps)?,
            self.delay_steps,
            self.scheme,
        )?;
        p.clock = self.clock;
        Ok(p)
    }

    pub fn tau(&self) -> f64 {
        self.delay_steps as f64 / self.n_steps as f64
    }
}

/// Statistics of one final estimate over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats {
    pub holevo_variance: f64,
    pub moment_variance: f64,
    pub std_error: f64,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub feedback: Option<EstimatorStats>,
    pub arg_a: EstimatorStats,
    pub arg_c: EstimatorStats,
    /// Mean of `1 / n_p` over trajectories with a regular squeezed-state map.
    pub mean_inv_np: f64,
    pub mean_abs_b: f64,
    pub max_abs_b: f64,
    /// Trajectories with at least one undefined estimate.
    pub invalid_count: usize,
    /// Trajectories whose `|B(1)| >= 1`.
    pub singular_count: usize,
    pub n_traj: usize,
    pub tau: f64,
}

impl EnsembleSummary {
    pub fn get(&self, which: Estimator) -> Option<&EstimatorStats> {
        match which {
            Estimator::Feedback => self.feedback.as_ref(),
            Estimator::ArgA => Some(&self.arg_a),
            Estimator::ArgC => Some(&self.arg_c),
        }
    }
}

/// Run every trajectory of `cfg` on the current rayon pool.
///
/// Trajectory `i` always draws stream `i` of the master seed, and the
/// reduction runs in index order, so the summary does not depend on the
/// number of worker threads.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    let params = cfg.trajectory_params()?;
    let results: Vec<Result<TrajectoryResult>> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&params, &NoiseStream::new(cfg.master_seed, i)))
        .collect();
    let results: Vec<TrajectoryResult> = results.into_iter().collect::<Result<_>>()?;
    summarize(cfg, &params, &results)
}

fn summarize(
    cfg: &EnsembleConfig,
    params: &TrajectoryParams,
    results: &[TrajectoryResult],
) -> Result<EnsembleSummary> {
    let ceiling = params.b_ceiling();
    let mut sum_abs_b = 0.0;
    let mut max_abs_b = 0.0f64;
    let mut inv_np = Vec::new();
    let mut invalid_count = 0;
    for (i, r) in results.iter().enumerate() {
        let abs_b = r.record.b.norm();
        if abs_b > ceiling {
            return Err(Error::BCeilingViolated {
                trajectory: i as u64,
                abs_b,
                ceiling,
            });
        }
        sum_abs_b += abs_b;
        max_abs_b = max_abs_b.max(abs_b);
        if let Some(n_p) = r.n_p.filter(|n| *n > 0.0) {
            inv_np.push(1.0 / n_p);
        }
        let e = &r.estimates;
        let feedback_missing = cfg.scheme.has_intermediate_estimate() && e.feedback_final.is_none();
        if feedback_missing || e.arg_a.is_none() || e.arg_c.is_none() {
            invalid_count += 1;
        }
    }

    let stats_for = |which: Estimator| -> Result<EstimatorStats> {
        let phases: Vec<f64> = results.iter().filter_map(|r| r.estimates.get(which)).collect();
        let pv = phase_variance(&phases, cfg.true_phase)?;
        Ok(EstimatorStats {
            holevo_variance: pv.holevo,
            moment_variance: pv.moment,
            std_error: pv.std_error,
            n_valid: pv.n,
        })
    };

    let n = results.len();
    Ok(EnsembleSummary {
        feedback: if cfg.scheme.has_intermediate_estimate() {
            Some(stats_for(Estimator::Feedback)?)
        } else {
            None
        },
        arg_a: stats_for(Estimator::ArgA)?,
        arg_c: stats_for(Estimator::ArgC)?,
        mean_inv_np: if inv_np.is_empty() {
            f64::NAN
        } else {
            inv_np.iter().sum::<f64>() / inv_np.len() as f64
        },
        mean_abs_b: sum_abs_b / n as f64,
        max_abs_b,
        invalid_count,
        singular_count: n - inv_np.len(),
        n_traj: n,
        tau: cfg.tau(),
    })
}

/// One row of a delay sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub delay_steps: usize,
    pub tau: f64,
    pub summary: EnsembleSummary,
}

/// Seed used for the ensemble at `delay_steps` of a sweep.
pub fn sweep_seed(master_seed: u64, delay_steps: usize) -> u64 {
    derive_seed(master_seed, delay_steps as u64)
}

/// Run `base` once per delay. Delays must ascend and start at 1; each delay
/// gets its own derived seed so the points are statistically independent.
pub fn delay_sweep(base: &EnsembleConfig, delays: &[usize]) -> Result<Vec<SweepPoint>> {
    if delays.first() != Some(&1) {
        return Err(Error::InvalidConfig("delay sweep must start at one step".into()));
    }
    if delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("delays must be strictly ascending".into()));
    }
    delays
        .iter()
        .map(|&d| {
            let cfg = EnsembleConfig {
                delay_steps: d,
                master_seed: sweep_seed(base.master_seed, d),
                ..*base
            };
            Ok(SweepPoint {
                delay_steps: d,
                tau: cfg.tau(),
                summary: run_ensemble(&cfg)?,
            })
        })
        .collect()
}

/// Baseline (minimum of the first `k_baseline` values) and the excess of
/// every value over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Excess {
    pub baseline: f64,
    pub excess: Vec<f64>,
}

pub fn excess_over_baseline(variances: &[f64], k_baseline: usize) -> Result<Excess> {
    if k_baseline == 0 {
        return Err(Error::InvalidConfig("k_baseline must be >= 1".into()));
    }
    if variances.is_empty() {
        return Err(Error::InvalidConfig("empty sweep".into()));
    }
    let baseline = variances
        .iter()
        .take(k_baseline)
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(Excess {
        baseline,
        excess: variances.iter().map(|v| v - baseline).collect(),
    })
}

pub const DEFAULT_K_BASELINE: usize = 6;

/// Excess Holevo variance of `which` along a sweep.
pub fn excess_variance(sweep: &[SweepPoint], which: Estimator, k_baseline: usize) -> Result<Excess> {
    let vars = sweep
        .iter()
        .map(|p| {
            p.summary
                .get(which)
                .map(|s| s.holevo_variance)
                .ok_or(Error::NoIntermediateEstimate)
        })
        .collect::<Result<Vec<_>>>()?;
    excess_over_baseline(&vars, k_baseline)
}

/// Mean of `1 / n` computed directly and through the two-term expansion
/// `1/<n> + <dn^2>/<n>^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMoment {
    pub direct: f64,
    pub expansion: f64,
}

pub fn inverse_photon_moment(values: &[f64]) -> Result<InverseMoment> {
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidConfig("photon numbers must be positive".into()));
    }
    let n = values.len() as f64;
    let direct = values.iter().map(|v| 1.0 / v).sum::<f64>() / n;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(InverseMoment {
        direct,
        expansion: 1.0 / mean + var / mean.powi(3),
    })
}

/// Slope of excess variance against `tau` over the points with
/// `alpha * tau <= cutoff`.
pub fn fit_delay_slope(
    alpha: f64,
    taus: &[f64],
    values: &[f64],
    std_errors: &[f64],
    cutoff: f64,
) -> Result<LinearFit> {
    let keep: Vec<usize> = (0..taus.len()).filter(|&i| alpha * taus[i] <= cutoff).collect();
    if keep.len() < 3 {
        return Err(Error::InsufficientRange { usable: keep.len() });
    }
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    fit_line(&pick(taus), &pick(values), Some(&pick(std_errors)))
}

pub const MARK_ONE_CUTOFF: f64 = 0.3;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn identical_phases_have_no_spread() {
        assert!(holevo_variance(&[0.3; 10]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn three_point_example() {
        let h = holevo_variance(&[0.0, FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert!((h - 8.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_phases_are_unmeasurable() {
        assert_eq!(holevo_variance(&[0.0, PI]), Err(Error::Unmeasurable));
        assert_eq!(holevo_variance(&[0.0, FRAC_PI_2, PI, -FRAC_PI_2]), Err(Error::Unmeasurable));
    }

    #[test]
    fn gaussian_small_angle_agreement() {
        let s = NoiseStream::new(77, 0);
        let sigma2 = 1e-3;
        let phases: Vec<f64> = s.increments(sigma2).take(100_000).map(|z| 0.4 + z).collect();
        let pv = phase_variance(&phases, 0.4).unwrap();
        assert!((pv.holevo / sigma2 - 1.0).abs() < 0.03, "{pv:?}");
        assert!((pv.moment / sigma2 - 1.0).abs() < 0.03, "{pv:?}");
        // sd of a variance estimate ~ sigma^2 sqrt(2 / n)
        let expected_se = sigma2 * (2.0 / 1e5f64).sqrt();
        assert!((pv.std_error / expected_se - 1.0).abs() < 0.1, "{pv:?}");
        assert!(pv.moment <= pv.holevo * 1.1);
    }

    #[test]
    fn baseline_rule() {
        let e = excess_over_baseline(&[3.0, 2.0, 2.5, 4.0, 1.0], 3).unwrap();
        assert_eq!(e.baseline, 2.0);
        assert_eq!(e.excess, vec![1.0, 0.0, 0.5, 2.0, -1.0]);
        let flat = excess_over_baseline(&[0.5; 8], 6).unwrap();
        assert!(flat.excess.iter().all(|&x| x == 0.0));
        assert!(excess_over_baseline(&[1.0], 0).is_err());
    }

    #[test]
    fn inverse_moment_examples() {
        let m = inverse_photon_moment(&[40.0; 5]).unwrap();
        assert!((m.direct - 0.025).abs() < 1e-16 && (m.expansion - 0.025).abs() < 1e-16);

        let m = inverse_photon_moment(&[50.0, 150.0]).unwrap();
        assert!((m.direct - 1.0 / 75.0).abs() < 1e-15);
        assert!((m.expansion - 0.0125).abs() < 1e-15);

        // symmetric spread with sigma / mu = 0.01: remainder ~ (sigma/mu)^4
        let m = inverse_photon_moment(&[990.0, 1010.0]).unwrap();
        assert!((m.direct / m.expansion - 1.0).abs() < 1e-6);

        assert!(inverse_photon_moment(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn ensemble_config_validation() {
        let ok = EnsembleConfig::new(FeedbackScheme::ArgA, 5.0, 1024, 256, 10, 0);
        assert!(ok.validate().is_ok());
        assert!(EnsembleConfig { delay_steps: 257, ..ok }.validate().is_err());
        assert!(EnsembleConfig { delay_steps: 0, ..ok }.validate().is_err());
        assert!(EnsembleConfig { n_traj: 1, ..ok }.validate().is_err());
        assert!(EnsembleConfig { n_steps: 1000, ..ok }.validate().is_err());
    }

    #[test]
    fn ensemble_is_deterministic_and_thread_independent() {
        let cfg = EnsembleConfig::new(FeedbackScheme::VarEps, 5.0, 1024, 4, 64, 123);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&cfg)).unwrap();
        let b = four.install(|| run_ensemble(&cfg)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.invalid_count, 0);
        assert!(a.arg_c.std_error > 0.0);
    }

    #[test]
    fn sweep_checks_its_delay_list() {
        let cfg = EnsembleConfig::new(FeedbackScheme::ArgA, 5.0, 256, 1, 4, 0);
        assert!(delay_sweep(&cfg, &[2, 4]).is_err());
        assert!(delay_sweep(&cfg, &[1, 4, 2]).is_err());
        let s = delay_sweep(&cfg, &[1, 2, 4]).unwrap();
        assert_eq!(s.iter().map(|p| p.delay_steps).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(s[2].tau, 4.0 / 256.0);
    }

    #[test]
    fn slope_needs_three_points_below_cutoff() {
        let taus = [0.01, 0.02, 0.1, 0.2];
        let r = fit_delay_slope(10.0, &taus, &[0.0; 4], &[1.0; 4], 0.3);
        assert_eq!(r, Err(Error::InsufficientRange { usable: 2 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn holevo_is_rotation_invariant(phases in proptest::collection::vec(-3.0f64..3.0, 2..40), shift in -10.0f64..10.0) {
            if let Ok(h) = holevo_variance(&phases) {
                prop_assume!(h < 1e6);
                let rotated: Vec<f64> = phases.iter().map(|p| p + shift).collect();
                let h2 = holevo_variance(&rotated).unwrap();
                prop_assert!((h - h2).abs() <= 1e-9 * (1.0 + h.abs()));
            }
        }
    }
}
