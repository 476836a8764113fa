//! Static SVG line plot of azimuth against time.

use std::fmt::Write;

use crate::metrics::Trajectory;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLOURS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// Renders estimated azimuth tracks as points and the truth (if any) as a
/// line. Azimuth wraps are drawn as breaks in the line.
pub fn azimuth_svg(series: &[(&str, &Trajectory)], truth: Option<&Trajectory>) -> String {
    let t_end = series
        .iter()
        .map(|(_, t)| *t)
        .chain(truth)
        .filter_map(|t| t.entries().last().map(|e| e.time))
        .fold(1e-9, f64::max);
    let x = |t: f64| MARGIN + t / t_end * (WIDTH - 2.0 * MARGIN);
    let y = |az: f64| MARGIN + (180.0 - az) / 360.0 * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for az in [-180.0, -90.0, 0.0, 90.0, 180.0] {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{az}</text>"##,
            MARGIN,
            y(az),
            WIDTH - MARGIN,
            y(az),
            MARGIN - 6.0,
            y(az) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">time (s), 0 to {t_end:.2}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" font-size="12" transform="rotate(-90 14 {:.2})" text-anchor="middle">azimuth (deg)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    if let Some(truth) = truth {
        let mut path = String::new();
        let mut previous: Option<f64> = None;
        for e in truth.entries().iter().filter(|e| e.valid) {
            let command = match previous {
                Some(p) if (e.azimuth - p).abs() <= 180.0 => 'L',
                _ => 'M',
            };
            let _ = write!(path, "{command}{:.2},{:.2} ", x(e.time), y(e.azimuth));
            previous = Some(e.azimuth);
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            path.trim_end()
        );
    }
    for (k, (name, trajectory)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let _ = writeln!(svg, r#"<g fill="{colour}">"#);
        for e in trajectory.entries().iter().filter(|e| e.valid) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#,
                x(e.time),
                y(e.azimuth)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{name}</text></g>"#,
            WIDTH - MARGIN - 80.0,
            MARGIN - 20.0 + 14.0 * k as f64
        );
    }
    if truth.is_some() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">truth</text>"#,
            WIDTH - MARGIN - 160.0,
            MARGIN - 20.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
