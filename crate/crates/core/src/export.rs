//! Output formats: trajectory CSV, JSON reports and an SVG plot of the
//! running maximum weight.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::simulate::PathResult;

pub const TRAJECTORY_HEADER: &str = "path,step,time,stock,weight";

/// One row per recorded `(path, step, stock)`; paths without a recorded
/// trajectory are skipped.
pub fn write_trajectory_csv<W: Write>(paths: &[PathResult], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for p in paths {
        let Some(traj) = &p.trajectory else { continue };
        for pt in traj {
            for (i, w) in pt.weights.iter().enumerate() {
                writeln!(out, "{},{},{},{},{}", p.path, pt.step, pt.time, i, w)?;
            }
        }
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line plot of `max_i mu_i(t)` for the first `max_paths` recorded paths with
/// a dashed line at `threshold`. Weights are plotted on `[0, 1]`.
pub fn max_weight_svg(
    paths: &[PathResult],
    threshold: f64,
    horizon: f64,
    max_paths: usize,
    title: &str,
) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |t: f64| MARGIN_L + plot_w * (t / horizon).clamp(0.0, 1.0);
    let sy = |w: f64| MARGIN_T + plot_h * (1.0 - w.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_L}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_T + plot_h
    );
    for k in 0..=5 {
        let w = k as f64 / 5.0;
        let t = horizon * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="12">{w:.1}</text>"#,
            MARGIN_L - 8.0,
            sy(w) + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            sx(t),
            MARGIN_T + plot_h + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="14">time</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 18 {:.1})">max weight</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    for (idx, p) in paths
        .iter()
        .filter(|p| p.trajectory.is_some())
        .take(max_paths)
        .enumerate()
    {
        let traj = p.trajectory.as_ref().expect("filtered");
        let mut pts = String::new();
        for pt in traj {
            let top = pt.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let _ = write!(pts, "{:.2},{:.2} ", sx(pt.time), sy(top));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            PALETTE[idx % PALETTE.len()],
            pts.trim_end()
        );
    }

    let y = sy(threshold);
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="red" stroke-dasharray="6,4"/>"#,
        MARGIN_L + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12" fill="red">1 - delta = {threshold}</text>"#,
        MARGIN_L + plot_w - 4.0,
        y - 6.0
    );
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    if t == t.trunc() {
        format!("{t:.0}")
    } else {
        format!("{t:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::TrajectoryPoint;

    fn path() -> PathResult {
        PathResult {
            path: 0,
            hit: false,
            hit_time: None,
            hit_stock: None,
            max_weight_seen: 0.6,
            min_weight_seen: 0.4,
            steps_taken: 1,
            post_hit_diagnostics: false,
            trajectory: Some(vec![
                TrajectoryPoint {
                    step: 0,
                    time: 0.0,
                    weights: vec![0.5, 0.5],
                },
                TrajectoryPoint {
                    step: 1,
                    time: 0.5,
                    weights: vec![0.6, 0.4],
                },
            ]),
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_trajectory_csv(&[path()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[3], "0,1,0.5,0,0.6");
    }

    #[test]
    fn svg_has_one_polyline_per_path() {
        let svg = max_weight_svg(&[path(), path()], 0.8, 1.0, 10, "a < b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
    }
}
