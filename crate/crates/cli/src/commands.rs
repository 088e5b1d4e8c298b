//! The four subcommands. Each returns its outputs in memory; `main` decides
//! where they go.

use std::fmt::Write as _;

use phasedelay::linearized::{slope_vs_tau, LinearizedConfig};
use phasedelay::sim::derive_seed;
use phasedelay::stats::{delay_sweep, excess_variance, fit_delay_slope, EnsembleConfig, MARK_ONE_CUTOFF};
use phasedelay::theory::{
    corrected_limit, delay_limit, delay_limit_asymptotic, heterodyne_var, mark_one_delay_var,
    mark_two_intro_var, perturbation_quadrature, theory_limit_no_delay, DEFAULT_V1,
};
use phasedelay::{
    simulate, Estimator, FeedbackScheme, NoiseStream, SignalModel, SweepPoint, TimeGrid, TrajectoryParams,
};

use crate::config::ExperimentConfig;
use crate::plot;
use crate::table::{Cell, CsvData, Table};
use crate::{CliError, Outputs};

/// Slopes accepted by `markone-check`.
pub const SLOPE_WINDOW: (f64, f64) = (0.3, 0.6);

pub const SWEEP_COLUMNS: [&str; 19] = [
    "scheme",
    "alpha",
    "n_bar",
    "delay_steps",
    "tau",
    "estimator",
    "holevo_var",
    "moment_var",
    "std_error",
    "baseline_var",
    "excess_var",
    "mean_abs_b",
    "mean_inv_np",
    "invalid_count",
    "theory_limit",
    "theory_corrected_limit",
    "heterodyne_ref",
    "tau_half_ref",
    "introduced_var",
];

pub const THEORY_COLUMNS: [&str; 12] = [
    "n_bar",
    "alpha",
    "tau",
    "delay_limit",
    "delay_limit_asymptotic",
    "heterodyne_var",
    "theory_limit_no_delay",
    "mark_two_intro_var",
    "mark_one_delay_var",
    "corrected_limit",
    "quadrature_var",
    "quadrature_delay_var",
];

pub const TRAJ_COLUMNS: [&str; 11] = [
    "step", "v", "lo_phase", "i_dv", "a_re", "a_im", "b_re", "b_im", "c_re", "c_im", "eps",
];

pub const MARKONE_COLUMNS: [&str; 6] = ["model", "alpha", "slope", "slope_se", "intercept", "n_points"];

pub const MARKONE_POINT_COLUMNS: [&str; 9] = [
    "model",
    "alpha",
    "delay_steps",
    "tau",
    "variance",
    "std_error",
    "excess_var",
    "tau_half_ref",
    "in_fit",
];

/// Ensemble seed for the `index`-th alpha. Schemes at the same alpha share
/// it, so scheme comparisons use common random numbers.
pub fn alpha_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, 0xa1fa_0000 + index as u64)
}

fn ensemble_base(cfg: &ExperimentConfig, scheme: FeedbackScheme, alpha_index: usize) -> EnsembleConfig {
    EnsembleConfig {
        clock: cfg.simplified_clock,
        true_phase: cfg.true_phase,
        ..EnsembleConfig::new(
            scheme,
            cfg.alphas[alpha_index],
            cfg.n_steps,
            1,
            cfg.n_traj,
            alpha_seed(cfg.master_seed, alpha_index),
        )
    }
}

/// CSV bytes plus the parsed view the figures are drawn from.
fn csv_outputs(table: &Table) -> Result<(Vec<u8>, CsvData), CliError> {
    let bytes = table.to_csv()?;
    let data = CsvData::parse(&bytes)?;
    Ok((bytes, data))
}

/// Delay sweep over every scheme, alpha and delay of the config, one row
/// per estimator.
pub fn sweep_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(&SWEEP_COLUMNS);
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        for &scheme in &cfg.schemes {
            let sweep = delay_sweep(&ensemble_base(cfg, scheme, ai), &cfg.delays)?;
            for &est in &cfg.estimators {
                push_sweep_rows(&mut table, cfg, scheme, alpha, est, &sweep);
            }
        }
    }
    Ok(table)
}

fn push_sweep_rows(
    table: &mut Table,
    cfg: &ExperimentConfig,
    scheme: FeedbackScheme,
    alpha: f64,
    est: Estimator,
    sweep: &[SweepPoint],
) {
    let n_bar = alpha * alpha;
    let het = (n_bar > 0.0).then(|| heterodyne_var(n_bar));
    let baseline = excess_variance(sweep, est, cfg.k_baseline).ok().map(|e| e.baseline);
    for p in sweep {
        let s = p.summary.get(est);
        let holevo = s.map(|s| s.holevo_variance);
        table.push(vec![
            scheme.to_string().into(),
            alpha.into(),
            n_bar.into(),
            p.delay_steps.into(),
            p.tau.into(),
            est.label().into(),
            holevo.into(),
            s.map(|s| s.moment_variance).into(),
            s.map(|s| s.std_error).into(),
            baseline.into(),
            holevo.zip(baseline).map(|(h, b)| h - b).into(),
            p.summary.mean_abs_b.into(),
            p.summary.mean_inv_np.into(),
            p.summary.invalid_count.into(),
            delay_limit(p.tau, n_bar).ok().into(),
            corrected_limit(p.summary.mean_inv_np, p.tau).into(),
            het.into(),
            (p.tau / 2.0).into(),
            holevo.zip(het).map(|(h, r)| h - r).into(),
        ]);
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let table = sweep_table(cfg)?;
    let (bytes, data) = csv_outputs(&table)?;
    let mut out = Outputs::default();
    out.add("sweep.csv", bytes);
    for (name, svg) in plot::sweep_figures(&data)? {
        out.add(&name, svg.into_bytes());
    }
    let _ = writeln!(
        out.report,
        "sweep: {} rows ({} schemes x {} alphas x {} delays x {} estimators)",
        table.rows.len(),
        cfg.schemes.len(),
        cfg.alphas.len(),
        cfg.delays.len(),
        cfg.estimators.len()
    );
    Ok(out)
}

/// Fitted slope of one model/alpha in the mark I check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeResult {
    pub alpha: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkOneReport {
    pub full: Vec<SlopeResult>,
    pub full_mean: SlopeResult,
    pub linearized: SlopeResult,
    pub points: Table,
}

impl MarkOneReport {
    pub fn passed(&self) -> bool {
        let inside = |s: f64| (SLOPE_WINDOW.0..=SLOPE_WINDOW.1).contains(&s);
        inside(self.full_mean.slope) && inside(self.linearized.slope)
    }
}

/// Delays of a full-simulation slope run: the baseline window plus every
/// delay inside the fit cutoff.
pub fn markone_delays(cfg: &ExperimentConfig, alpha: f64) -> Vec<usize> {
    let grid = TimeGrid::new(cfg.n_steps).expect("validated grid");
    cfg.delays
        .iter()
        .enumerate()
        .filter(|&(i, &d)| i < cfg.k_baseline || alpha * grid.tau(d) <= MARK_ONE_CUTOFF)
        .map(|(_, &d)| d)
        .collect()
}

pub fn markone_report(cfg: &ExperimentConfig) -> Result<MarkOneReport, CliError> {
    let mut points = Table::new(&MARKONE_POINT_COLUMNS);
    let mut full = Vec::new();
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let delays = markone_delays(cfg, alpha);
        let sweep = delay_sweep(&ensemble_base(cfg, FeedbackScheme::Simplified, ai), &delays)?;
        let excess = excess_variance(&sweep, Estimator::Feedback, cfg.k_baseline)?;
        let stats: Vec<_> = sweep
            .iter()
            .map(|p| p.summary.feedback.expect("simplified feedback has an estimate"))
            .collect();
        let taus: Vec<f64> = sweep.iter().map(|p| p.tau).collect();
        let ses: Vec<f64> = stats.iter().map(|s| s.std_error).collect();
        let fit = fit_delay_slope(alpha, &taus, &excess.excess, &ses, MARK_ONE_CUTOFF)?;
        for (i, p) in sweep.iter().enumerate() {
            points.push(vec![
                "full".into(),
                alpha.into(),
                p.delay_steps.into(),
                p.tau.into(),
                stats[i].holevo_variance.into(),
                ses[i].into(),
                excess.excess[i].into(),
                (p.tau / 2.0).into(),
                usize::from(alpha * p.tau <= MARK_ONE_CUTOFF).into(),
            ]);
        }
        full.push(SlopeResult {
            alpha,
            slope: fit.slope,
            slope_se: fit.slope_se,
            intercept: fit.intercept,
            n_points: fit.n_points,
        });
    }
    let n = full.len() as f64;
    let full_mean = SlopeResult {
        alpha: f64::NAN,
        slope: full.iter().map(|s| s.slope).sum::<f64>() / n,
        slope_se: full.iter().map(|s| s.slope_se.powi(2)).sum::<f64>().sqrt() / n,
        intercept: full.iter().map(|s| s.intercept).sum::<f64>() / n,
        n_points: full.iter().map(|s| s.n_points).sum(),
    };

    let base = LinearizedConfig::new(cfg.linear_alpha, 0.0, cfg.linear_steps);
    let lin = slope_vs_tau(&base, &cfg.linear_taus, cfg.linear_paths, derive_seed(cfg.master_seed, 0x11ea))?;
    let v0 = lin.points[0].variance;
    for (tau, p) in lin.taus.iter().zip(&lin.points) {
        points.push(vec![
            "linearized".into(),
            cfg.linear_alpha.into(),
            ((tau * cfg.linear_steps as f64).round() as usize).into(),
            (*tau).into(),
            p.variance.into(),
            p.std_error.into(),
            (p.variance - v0).into(),
            (tau / 2.0).into(),
            1usize.into(),
        ]);
    }
    Ok(MarkOneReport {
        full,
        full_mean,
        linearized: SlopeResult {
            alpha: cfg.linear_alpha,
            slope: lin.fit.slope,
            slope_se: lin.fit.slope_se,
            intercept: lin.fit.intercept,
            n_points: lin.fit.n_points,
        },
        points,
    })
}

pub fn cmd_markone_check(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let report = markone_report(cfg)?;
    let mut summary = Table::new(&MARKONE_COLUMNS);
    let row = |model: &str, s: &SlopeResult| -> Vec<Cell> {
        vec![
            model.into(),
            Some(s.alpha).filter(|a| a.is_finite()).into(),
            s.slope.into(),
            s.slope_se.into(),
            s.intercept.into(),
            s.n_points.into(),
        ]
    };
    for s in &report.full {
        summary.push(row("full", s));
    }
    summary.push(row("full_mean", &report.full_mean));
    summary.push(row("linearized", &report.linearized));

    let (points_csv, points_data) = csv_outputs(&report.points)?;
    let mut out = Outputs::default();
    out.add("markone.csv", summary.to_csv()?);
    out.add("markone.svg", plot::markone_figure(&points_data)?.into_bytes());
    out.add("markone_points.csv", points_csv);

    for s in &report.full {
        let _ = writeln!(
            out.report,
            "full simulation alpha={}: slope {:.4} +/- {:.4} ({} points)",
            s.alpha, s.slope, s.slope_se, s.n_points
        );
    }
    let verdict = |s: f64| {
        if (SLOPE_WINDOW.0..=SLOPE_WINDOW.1).contains(&s) {
            "PASS"
        } else {
            "FAIL"
        }
    };
    let _ = writeln!(
        out.report,
        "full simulation mean slope {:.4} +/- {:.4}: {}",
        report.full_mean.slope,
        report.full_mean.slope_se,
        verdict(report.full_mean.slope)
    );
    let _ = writeln!(
        out.report,
        "linearized alpha={}: slope {:.4} +/- {:.4}: {}",
        report.linearized.alpha,
        report.linearized.slope,
        report.linearized.slope_se,
        verdict(report.linearized.slope)
    );
    out.passed = Some(report.passed());
    Ok(out)
}

/// Log-spaced grid from `tau_min` to exactly 1.
pub fn tau_grid(tau_min: f64, points: usize) -> Vec<f64> {
    let span = tau_min.ln();
    (0..points)
        .map(|i| {
            if i + 1 == points {
                1.0
            } else {
                (span * (1.0 - i as f64 / (points - 1) as f64)).exp()
            }
        })
        .collect()
}

pub fn theory_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(&THEORY_COLUMNS);
    let taus = tau_grid(cfg.tau_min, cfg.tau_points);
    for &n_bar in &cfg.n_bars {
        let alpha = n_bar.sqrt();
        let positive = n_bar > 0.0;
        let quad = if alpha >= 10.0 {
            Some(perturbation_quadrature(alpha, DEFAULT_V1)?)
        } else {
            None
        };
        for &tau in &taus {
            table.push(vec![
                n_bar.into(),
                alpha.into(),
                tau.into(),
                delay_limit(tau, n_bar).ok().into(),
                positive.then(|| delay_limit_asymptotic(tau, n_bar)).into(),
                positive.then(|| heterodyne_var(n_bar)).into(),
                positive.then(|| theory_limit_no_delay(n_bar)).into(),
                positive.then(|| mark_two_intro_var(n_bar)).into(),
                positive.then(|| mark_one_delay_var(alpha, tau)).into(),
                positive.then(|| corrected_limit(1.0 / n_bar, tau)).into(),
                quad.into(),
                quad.map(|q| q + tau / 2.0).into(),
            ]);
        }
    }
    Ok(table)
}

pub fn cmd_theory(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let table = theory_table(cfg)?;
    let (bytes, data) = csv_outputs(&table)?;
    let mut out = Outputs::default();
    out.add("theory.csv", bytes);
    out.add("theory.svg", plot::theory_figure(&data)?.into_bytes());
    let _ = writeln!(out.report, "theory: {} rows", table.rows.len());
    Ok(out)
}

/// Step-by-step record of trajectory `index` of the single configured
/// scheme, alpha and delay.
pub fn traj_table(cfg: &ExperimentConfig, index: usize) -> Result<Table, CliError> {
    if cfg.schemes.len() != 1 || cfg.alphas.len() != 1 || cfg.delays.len() != 1 {
        return Err(CliError::Config(
            "traj needs exactly one scheme, one alpha and one delay".into(),
        ));
    }
    if index >= cfg.n_traj {
        return Err(CliError::Config(format!(
            "trajectory index {index} out of range for n_traj = {}",
            cfg.n_traj
        )));
    }
    let mut params = TrajectoryParams::new(
        SignalModel::new(cfg.alphas[0], cfg.true_phase)?,
        TimeGrid::new(cfg.n_steps)?,
        cfg.delays[0],
        cfg.schemes[0],
    )?;
    params.clock = cfg.simplified_clock;
    // Same stream as trajectory `index` of the sweep ensemble at this delay.
    let seed = phasedelay::stats::sweep_seed(alpha_seed(cfg.master_seed, 0), cfg.delays[0]);
    let mut noise = NoiseStream::new(seed, index as u64).increments(params.grid.dv());
    let mut table = Table::new(&TRAJ_COLUMNS);
    simulate(
        &params,
        |_| noise.next_increment(),
        |s| {
            table.push(vec![
                s.step.into(),
                s.v.into(),
                s.lo_phase.into(),
                s.i_dv.into(),
                s.a.re.into(),
                s.a.im.into(),
                s.b.re.into(),
                s.b.im.into(),
                s.c.re.into(),
                s.c.im.into(),
                s.eps.into(),
            ])
        },
    )?;
    Ok(table)
}

pub fn cmd_traj(cfg: &ExperimentConfig, index: usize) -> Result<Outputs, CliError> {
    let table = traj_table(cfg, index)?;
    let mut out = Outputs::default();
    out.add("traj.csv", table.to_csv()?);
    let _ = writeln!(out.report, "traj: {} steps of trajectory {index}", table.rows.len());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::parse(
            "n_steps = 2^10\ndelays = 1, 2, 4\nalphas = 4\nn_traj = 40\n\
             schemes = heterodyne, simplified\nk_baseline = 2",
        )
        .unwrap()
    }

    #[test]
    fn sweep_rows_cover_the_grid() {
        let t = sweep_table(&small()).unwrap();
        assert_eq!(t.rows.len(), 2 * 3 * 3);
        let csv = CsvData::parse(&t.to_csv().unwrap()).unwrap();
        assert_eq!(csv.header, SWEEP_COLUMNS);
        let tau = csv.column("tau").unwrap();
        let d = csv.column("delay_steps").unwrap();
        for r in 0..csv.rows.len() {
            let steps: f64 = csv.rows[r][d].parse().unwrap();
            assert_eq!(csv.real(r, tau).unwrap(), steps / 1024.0);
        }
        // Heterodyne has no intermediate estimate: its feedback rows are blank.
        let est = csv.column("estimator").unwrap();
        let hv = csv.column("holevo_var").unwrap();
        let blank = (0..csv.rows.len())
            .filter(|&r| csv.rows[r][est] == "feedback" && csv.rows[r][0] == "heterodyne")
            .all(|r| csv.rows[r][hv].is_empty());
        assert!(blank);
    }

    #[test]
    fn excess_is_relative_to_the_baseline_minimum() {
        let t = sweep_table(&small()).unwrap();
        let csv = CsvData::parse(&t.to_csv().unwrap()).unwrap();
        let (h, b, e) = (
            csv.column("holevo_var").unwrap(),
            csv.column("baseline_var").unwrap(),
            csv.column("excess_var").unwrap(),
        );
        for r in 0..csv.rows.len() {
            if let (Some(h), Some(b), Some(e)) = (csv.real(r, h), csv.real(r, b), csv.real(r, e)) {
                assert!((h - b - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn theory_boundary_row_matches_heterodyne() {
        let cfg = ExperimentConfig::parse("n_bars = 100\ntau_points = 9").unwrap();
        let csv = CsvData::parse(&theory_table(&cfg).unwrap().to_csv().unwrap()).unwrap();
        let last = csv.rows.len() - 1;
        let limit = csv.real(last, csv.column("delay_limit").unwrap()).unwrap();
        let het = csv.real(last, csv.column("heterodyne_var").unwrap()).unwrap();
        assert_eq!(csv.real(last, csv.column("tau").unwrap()), Some(1.0));
        assert_eq!(limit, 0.0025);
        assert_eq!(limit, het);
    }

    #[test]
    fn theory_quadrature_column_at_alpha_100() {
        let cfg = ExperimentConfig::parse("n_bars = 10000\ntau_points = 3").unwrap();
        let csv = CsvData::parse(&theory_table(&cfg).unwrap().to_csv().unwrap()).unwrap();
        let quad = csv.real(0, csv.column("quadrature_var").unwrap()).unwrap();
        assert!((quad / 0.0025 - 1.0).abs() < 0.02, "{quad}");
    }

    #[test]
    fn theory_limit_is_monotone_on_the_log_grid() {
        let cfg = ExperimentConfig::parse("n_bars = 50, 1000\ntau_min = 1e-4\ntau_points = 30").unwrap();
        let csv = CsvData::parse(&theory_table(&cfg).unwrap().to_csv().unwrap()).unwrap();
        let col = csv.column("delay_limit").unwrap();
        for block in csv.rows.chunks(30).enumerate() {
            let base = block.0 * 30;
            for i in 1..30 {
                assert!(csv.real(base + i, col) > csv.real(base + i - 1, col));
            }
        }
        // alpha < 10 has no quadrature value.
        assert!(csv.rows[0][csv.column("quadrature_var").unwrap()].is_empty());
    }

    #[test]
    fn tau_grid_ends_exactly() {
        let g = tau_grid(1e-4, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert_eq!(g[4], 1.0);
        assert!((g[2] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn traj_requires_a_single_configuration() {
        let err = traj_table(&small(), 0).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let one = ExperimentConfig::parse("n_steps = 2^8\ndelays = 1\nalphas = 3\nn_traj = 4").unwrap();
        assert!(matches!(traj_table(&one, 4), Err(CliError::Config(_))));
        assert_eq!(traj_table(&one, 3).unwrap().rows.len(), 256);
    }

    #[test]
    fn markone_delays_keep_the_baseline_window() {
        let cfg = ExperimentConfig::default();
        assert_eq!(markone_delays(&cfg, 20.0), vec![1, 2, 4, 8, 16, 32, 64, 128]);
        assert_eq!(markone_delays(&cfg, 5.0).last(), Some(&512));
        assert_eq!(markone_delays(&cfg, 1e6).len(), cfg.k_baseline);
    }
}
