//! File writers. Every file goes through [`write_atomic`]: the bytes are written to a
//! hidden sibling and renamed into place, so a reader never sees a partial file.

use std::fmt::Write as _;
use std::path::Path;

use num::BigRational;
use serde::Serialize;

use super::HarnessError;
use crate::coeff_dynamics::Simulation;
use crate::solvers::SolverTrajectory;
use crate::worst_case::{format_rational, StepRatio, TwoModeOrbit};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| HarnessError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let bytes =
        serde_json::to_vec_pretty(value).map_err(|e| HarnessError::Numeric(e.to_string()))?;
    write_atomic(path, &bytes)
}

fn csv_bytes(
    fill: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
) -> Result<Vec<u8>, HarnessError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w).map_err(|e| HarnessError::Numeric(e.to_string()))?;
        w.flush()
            .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    }
    Ok(buf)
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `k, grad_norm, alpha, d_1..d_n`; `alpha` is empty on the last row.
pub fn trajectory_csv(t: &SolverTrajectory) -> Result<Vec<u8>, HarnessError> {
    let n = t.records[0].gradient.len();
    csv_bytes(|w| {
        let mut header = vec!["k".to_string(), "grad_norm".into(), "alpha".into()];
        header.extend((1..=n).map(|i| format!("d_{i}")));
        w.write_record(&header)?;
        for r in &t.records {
            let mut row = vec![
                r.k.to_string(),
                num(r.grad_norm),
                r.step_size.map(num).unwrap_or_default(),
            ];
            match &r.coefficients {
                Some(d) => row.extend(d.iter().copied().map(num)),
                None => row.extend(std::iter::repeat_n(String::new(), n)),
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// `k, d_1..d_n, mode_1..mode_n` with modes written as `S` or `F`.
pub fn simulation_csv(s: &Simulation) -> Result<Vec<u8>, HarnessError> {
    let n = s.eigenvalues.len();
    csv_bytes(|w| {
        let mut header = vec!["k".to_string()];
        header.extend((1..=n).map(|i| format!("d_{i}")));
        header.extend((1..=n).map(|i| format!("mode_{i}")));
        w.write_record(&header)?;
        for step in &s.steps {
            let mut row = vec![step.k.to_string()];
            row.extend(step.d.iter().copied().map(num));
            row.extend(step.modes.iter().map(|m| m.code().to_string()));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// `k, a, b, grad_norm_ratio`; the ratio is empty at `k = 0`.
pub fn orbit_csv_float(o: &TwoModeOrbit<f64>) -> Result<Vec<u8>, HarnessError> {
    let ratios = o.step_ratios();
    csv_bytes(|w| {
        w.write_record(["k", "a", "b", "grad_norm_ratio"])?;
        for p in &o.points {
            let ratio =
                p.k.checked_sub(1)
                    .map(|j| num(ratios[j]))
                    .unwrap_or_default();
            w.write_record([p.k.to_string(), num(p.a), num(p.b), ratio])?;
        }
        Ok(())
    })
}

/// Exact orbit with rationals written as `p/q`. A ratio whose square root is not
/// rational is written as a binary64 approximation.
pub fn orbit_csv_exact(o: &TwoModeOrbit<BigRational>) -> Result<Vec<u8>, HarnessError> {
    let ratios = o.step_ratios();
    csv_bytes(|w| {
        w.write_record(["k", "a", "b", "grad_norm_ratio"])?;
        for p in &o.points {
            let ratio = match p.k.checked_sub(1).map(|j| &ratios[j]) {
                None => String::new(),
                Some(StepRatio::Exact(r)) => format_rational(r),
                Some(StepRatio::Approx(x)) => num(*x),
            };
            w.write_record([
                p.k.to_string(),
                format_rational(&p.a),
                format_rational(&p.b),
                ratio,
            ])?;
        }
        Ok(())
    })
}

/// Line colors; the first series (smallest eigenvalue) is purple.
pub const PALETTE: [&str; 8] = [
    "#7e2f8e", "#d95319", "#a2142f", "#0072bd", "#77ac30", "#4dbeee", "#edb120", "#404040",
];

/// Line chart of `log10(series[j][k])` against `k`. Zero and non-finite values break
/// the line.
pub fn log_chart_svg(title: &str, labels: &[String], series: &[Vec<f64>]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 180.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;

    let logs: Vec<Vec<Option<f64>>> = series
        .iter()
        .map(|s| {
            s.iter()
                .map(|v| (v.is_finite() && *v > 0.0).then(|| v.log10()))
                .collect()
        })
        .collect();
    let finite = logs.iter().flatten().flatten().copied();
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (y_lo, y_hi) = if lo.is_finite() {
        (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
    } else {
        (-1.0, 0.0)
    };
    let k_max = series
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(1)
        .saturating_sub(1)
        .max(1) as f64;

    let px = |k: f64| LEFT + k / k_max * (W - LEFT - RIGHT);
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );

    let decades = (y_hi - y_lo) as usize;
    let y_step = decades.div_ceil(10).max(1);
    for d in (0..=decades).step_by(y_step) {
        let y = y_lo + d as f64;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" x2="{}" y1="{py:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{y}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            py(y) + 4.0,
            py = py(y),
        );
    }
    let k_step = nice_step(k_max);
    let mut k = 0.0;
    while k <= k_max {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{k}</text>"#,
            px(k),
            H - BOTTOM + 18.0
        );
        k += k_step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0
    );

    for (j, line) in logs.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, svg: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    segment.join(" ")
                );
            }
            segment.clear();
        };
        for (k, v) in line.iter().enumerate() {
            match v {
                Some(y) => segment.push(format!("{:.2},{:.2}", px(k as f64), py(*y))),
                None => flush(&mut segment, &mut svg),
            }
        }
        flush(&mut segment, &mut svg);
        let ly = TOP + 16.0 + 18.0 * j as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 36.0,
            ly + 4.0,
            escape(labels.get(j).map_or("", String::as_str))
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
        .max(1.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
