use std::fmt::Write;
use std::path::Path;

use planhub_core::planning::Trajectory;

use crate::{read_file, CliError};

const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Reads a trajectory file, or the trajectory inside a plan response.
pub fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = read_file(path)?;
    let parse_error = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_error(e.to_string()))?;
    let inner = match value.get("trajectory") {
        Some(t) => t.clone(),
        None if value.get("status").is_some() => {
            return Err(parse_error("plan response carries no trajectory".into()));
        }
        None => value,
    };
    serde_json::from_value(inner).map_err(|e| parse_error(e.to_string()))
}

/// One row per stored point, or per `step` seconds when given.
pub fn render_table(trajectory: &Trajectory, step: Option<f64>) -> String {
    let mut out = String::from("t");
    for j in 0..trajectory.dim() {
        write!(out, "\tj{j}").unwrap();
    }
    out.push('\n');
    let mut row = |t: f64, positions: &[f64]| {
        write!(out, "{t:.3}").unwrap();
        for p in positions {
            write!(out, "\t{p:.6}").unwrap();
        }
        out.push('\n');
    };
    match step {
        Some(step) if step > 0.0 => {
            let duration = trajectory.duration();
            let n = (duration / step).ceil() as usize;
            for k in 0..=n {
                let t = (k as f64 * step).min(duration);
                row(t, &trajectory.sample(t).0);
            }
        }
        _ => {
            for p in &trajectory.points {
                row(p.time_from_start, &p.positions);
            }
        }
    }
    out
}

/// Joint position against time, one polyline per joint.
pub fn render_svg(trajectory: &Trajectory) -> String {
    let (width, height, margin) = (640.0, 360.0, 40.0);
    let duration = trajectory.duration().max(1e-9);
    let (lo, hi) = trajectory
        .points
        .iter()
        .flat_map(|p| p.positions.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
    };
    let x = |t: f64| margin + (width - 2.0 * margin) * t / duration;
    let y = |v: f64| height - margin - (height - 2.0 * margin) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = margin,
        b = height - margin,
        r = width - margin
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t [s] (0 to {duration:.3})</text>"#,
        width / 2.0,
        height - 10.0
    )
    .unwrap();
    writeln!(svg, r#"<text x="4" y="{}" font-size="12">{hi:.3}</text>"#, margin - 4.0).unwrap();
    writeln!(
        svg,
        r#"<text x="4" y="{}" font-size="12">{lo:.3}</text>"#,
        height - margin + 14.0
    )
    .unwrap();

    let samples = 200;
    for j in 0..trajectory.dim() {
        let mut d = String::new();
        for k in 0..=samples {
            let t = duration * k as f64 / samples as f64;
            let v = trajectory.sample(t).0[j];
            write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, x(t), y(v)).unwrap();
        }
        let color = COLORS[j % COLORS.len()];
        writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"><title>j{j}</title></path>"#
        )
        .unwrap();
        for p in &trajectory.points {
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#,
                x(p.time_from_start),
                y(p.positions[j])
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">j{j}</text>"#,
            width - margin + 4.0,
            margin + 14.0 * j as f64
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
