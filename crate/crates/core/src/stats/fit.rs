use crate::error::{Error, Result};

/// Straight-line least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub n_points: usize,
}

/// Ordinary least squares. When per-point standard errors are supplied the
/// parameter errors are propagated from them; otherwise they come from the
/// residual scatter.
pub fn fit_line(xs: &[f64], ys: &[f64], y_se: Option<&[f64]>) -> Result<LinearFit> {
    let n = xs.len();
    if ys.len() != n || y_se.is_some_and(|s| s.len() != n) {
        return Err(Error::InvalidConfig("fit inputs differ in length".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientRange { usable: n });
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientRange { usable: 1 });
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let (slope_se, intercept_se) = match y_se {
        Some(se) => {
            let mut vs = 0.0;
            let mut vi = 0.0;
            for (x, s) in xs.iter().zip(se) {
                let ws = (x - x_mean) / sxx;
                let wi = 1.0 / nf - x_mean * ws;
                vs += ws * ws * s * s;
                vi += wi * wi * s * s;
            }
            (vs.sqrt(), vi.sqrt())
        }
        None => {
            let ssr: f64 = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| (y - intercept - slope * x).powi(2))
                .sum();
            let s2 = ssr / (nf - 2.0);
            (
                (s2 / sxx).sqrt(),
                (s2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt(),
            )
        }
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        n_points: n,
    })
}
