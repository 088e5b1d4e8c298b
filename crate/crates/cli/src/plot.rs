//! Self-contained SVG 1.1 line charts, and the figures derived from the
//! command CSVs. Figures read nothing but the CSV bytes, so re-rendering a
//! table reproduces its figure exactly.

use std::fmt::Write as _;

use crate::table::CsvData;
use crate::CliError;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Measured data: solid line with point markers.
    Measured,
    /// Exact curve: solid, no markers.
    Curve,
    /// Reference curve: dashed, no markers.
    Theory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let t = if log { v.log10() } else { v };
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.5 };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i32;
            (self.lo as i32..=self.hi as i32)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step + 1e-9).floor() as i64;
            (first..=last)
                .map(|i| {
                    let v = i as f64 * step;
                    (v, format!("{v:.decimals$}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn usable(&self, (x, y): (f64, f64)) -> bool {
        x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
    }

    pub fn render(&self) -> String {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .filter(|&p| self.usable(p))
        };
        let xa = Axis::fit(pts().map(|p| p.0), self.log_x);
        let ya = Axis::fit(pts().map(|p| p.1), self.log_y);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + xa.unit(x) * pw;
        let sy = |y: f64| TOP + (1.0 - ya.unit(y)) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        for (v, label) in xa.ticks() {
            let x = sx(v);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                TOP + ph,
                TOP + ph + 16.0
            );
        }
        for (v, label) in ya.ticks() {
            let y = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(20 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .copied()
                .filter(|&p| self.usable(p))
                .map(|(x, y)| (sx(x), sy(y)))
                .collect();
            let dash = match series.style {
                Style::Measured | Style::Curve => "",
                Style::Theory => r#" stroke-dasharray="6 4""#,
            };
            if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                    path.join(" ")
                );
            }
            if series.style == Style::Measured {
                for (x, y) in &pts {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
                }
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Rows of `csv` grouped by the values of `keys`, in order of first
/// appearance.
fn groups(csv: &CsvData, keys: &[usize]) -> Vec<(Vec<String>, Vec<usize>)> {
    let mut out: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
    for (i, row) in csv.rows.iter().enumerate() {
        let key: Vec<String> = keys.iter().map(|&k| row[k].clone()).collect();
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(i),
            None => out.push((key, vec![i])),
        }
    }
    out
}

/// Legend form of a numeric CSV cell (`10.0000000000` -> `10`).
fn short(cell: &str) -> String {
    cell.parse::<f64>().map(|x| x.to_string()).unwrap_or_else(|_| cell.to_string())
}

fn points(csv: &CsvData, rows: &[usize], x: usize, y: usize) -> Vec<(f64, f64)> {
    rows.iter()
        .filter_map(|&r| Some((csv.real(r, x)?, csv.real(r, y)?)))
        .collect()
}

/// Figures for a sweep table: for every estimator, the introduced variance
/// with the delay limit and heterodyne references, and the excess over the
/// small-delay baseline with the `tau/2` line.
pub fn sweep_figures(csv: &CsvData) -> Result<Vec<(String, String)>, CliError> {
    let scheme = csv.column("scheme")?;
    let alpha = csv.column("alpha")?;
    let est = csv.column("estimator")?;
    let tau = csv.column("tau")?;
    let introduced = csv.column("introduced_var")?;
    let excess = csv.column("excess_var")?;
    let limit = csv.column("theory_limit")?;
    let het = csv.column("heterodyne_ref")?;
    let half = csv.column("tau_half_ref")?;

    let mut figs = Vec::new();
    for (key, rows) in groups(csv, &[est]) {
        let name = &key[0];
        let mut intro = Chart {
            title: format!("introduced phase variance, {name} estimate"),
            x_label: "tau".into(),
            y_label: "variance".into(),
            log_x: true,
            log_y: true,
            series: Vec::new(),
        };
        let mut exc = Chart {
            title: format!("excess over baseline, {name} estimate"),
            ..intro.clone()
        };
        let sub = CsvData {
            header: csv.header.clone(),
            rows: rows.iter().map(|&r| csv.rows[r].clone()).collect(),
        };
        for (k, rs) in groups(&sub, &[scheme, alpha]) {
            let label = format!("{} a={}", k[0], short(&k[1]));
            intro.series.push(Series {
                label: label.clone(),
                points: points(&sub, &rs, tau, introduced),
                style: Style::Measured,
            });
            exc.series.push(Series {
                label,
                points: points(&sub, &rs, tau, excess),
                style: Style::Measured,
            });
        }
        for (k, rs) in groups(&sub, &[alpha]) {
            let first_scheme = &sub.rows[rs[0]][scheme];
            let rs: Vec<usize> = rs.into_iter().filter(|&r| &sub.rows[r][scheme] == first_scheme).collect();
            intro.series.push(Series {
                label: format!("limit a={}", short(&k[0])),
                points: points(&sub, &rs, tau, limit),
                style: Style::Theory,
            });
            intro.series.push(Series {
                label: format!("heterodyne a={}", short(&k[0])),
                points: points(&sub, &rs, tau, het),
                style: Style::Theory,
            });
        }
        if let Some((_, rs)) = groups(&sub, &[scheme, alpha]).into_iter().next() {
            exc.series.push(Series {
                label: "tau/2".into(),
                points: points(&sub, &rs, tau, half),
                style: Style::Theory,
            });
        }
        figs.push((format!("sweep_introduced_{name}.svg"), intro.render()));
        figs.push((format!("sweep_excess_{name}.svg"), exc.render()));
    }
    Ok(figs)
}

/// Delay limit, its small-delay form and the heterodyne level per `n_bar`.
pub fn theory_figure(csv: &CsvData) -> Result<String, CliError> {
    let n_bar = csv.column("n_bar")?;
    let tau = csv.column("tau")?;
    let limit = csv.column("delay_limit")?;
    let asym = csv.column("delay_limit_asymptotic")?;
    let het = csv.column("heterodyne_var")?;
    let mut chart = Chart {
        title: "lower limit to the introduced phase variance".into(),
        x_label: "tau".into(),
        y_label: "variance".into(),
        log_x: true,
        log_y: true,
        series: Vec::new(),
    };
    for (k, rs) in groups(csv, &[n_bar]) {
        chart.series.push(Series {
            label: format!("limit n={}", short(&k[0])),
            points: points(csv, &rs, tau, limit),
            style: Style::Curve,
        });
        chart.series.push(Series {
            label: format!("tau/(8n) n={}", short(&k[0])),
            points: points(csv, &rs, tau, asym),
            style: Style::Theory,
        });
        chart.series.push(Series {
            label: format!("heterodyne n={}", short(&k[0])),
            points: points(csv, &rs, tau, het),
            style: Style::Theory,
        });
    }
    Ok(chart.render())
}

/// Measured excess against `tau` for each model and alpha, with the
/// `tau/2` reference.
pub fn markone_figure(csv: &CsvData) -> Result<String, CliError> {
    let model = csv.column("model")?;
    let alpha = csv.column("alpha")?;
    let tau = csv.column("tau")?;
    let value = csv.column("excess_var")?;
    let half = csv.column("tau_half_ref")?;
    let mut chart = Chart {
        title: "mark I feedback: variance added by the delay".into(),
        x_label: "tau".into(),
        y_label: "excess variance".into(),
        log_x: false,
        log_y: false,
        series: Vec::new(),
    };
    let mut all = Vec::new();
    for (k, rs) in groups(csv, &[model, alpha]) {
        chart.series.push(Series {
            label: format!("{} a={}", k[0], short(&k[1])),
            points: points(csv, &rs, tau, value),
            style: Style::Measured,
        });
        all.extend(points(csv, &rs, tau, half));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.dedup();
    chart.series.push(Series {
        label: "tau/2".into(),
        points: all,
        style: Style::Theory,
    });
    Ok(chart.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(log: bool) -> Chart {
        Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: log,
            log_y: log,
            series: vec![
                Series {
                    label: "data".into(),
                    points: vec![(1e-3, 1e-4), (1e-2, 1e-3), (0.0, 5.0), (1.0, f64::NAN)],
                    style: Style::Measured,
                },
                Series {
                    label: "ref".into(),
                    points: vec![(1e-3, 2e-4), (1.0, 0.2)],
                    style: Style::Theory,
                },
            ],
        }
    }

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let s = chart(true).render();
        assert!(s.starts_with("<?xml"));
        assert!(s.contains(r#"version="1.1""#));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<svg").count(), 1);
        // The zero and NaN points are dropped on log axes.
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("1e-4") && s.contains("1e0"));
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn linear_axes_keep_nonpositive_points() {
        let s = chart(false).render();
        assert_eq!(s.matches("<circle").count(), 3);
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(chart(true).render(), chart(true).render());
    }

    #[test]
    fn linear_ticks_are_round() {
        let ax = Axis {
            lo: 0.0,
            hi: 1.0,
            log: false,
        };
        let labels: Vec<String> = ax.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0"]);
    }
}
