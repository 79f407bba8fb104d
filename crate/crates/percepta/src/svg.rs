//! Minimal SVG step chart of a threshold plot.

use std::fmt::Write;

use percepta_core::topology::Unit;
use percepta_core::ThresholdPlot;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn axis_label(unit: Unit) -> &'static str {
    match unit {
        Unit::Distance => "persistence threshold (px)",
        Unit::Density => "persistence threshold (density fraction)",
    }
}

/// Right-continuous step chart: count on the vertical axis, threshold on
/// the horizontal axis, extended 10% past the last breakpoint.
pub fn step_chart(plot: &ThresholdPlot) -> String {
    let max_break = plot.breakpoints().first().copied().unwrap_or(0.0);
    let x_max = if max_break > 0.0 {
        max_break * 1.1
    } else {
        1.0
    };
    let y_max = plot.count_at_zero() as f64 + 1.0;
    let sx = |t: f64| MARGIN + (t.min(x_max) / x_max) * (W - 2.0 * MARGIN);
    let sy = |c: f64| H - MARGIN - (c / y_max) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(x_max), sy(y_max));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" stroke="black" fill="none"/>"#
    );

    for c in 1..=plot.count_at_zero() {
        let y = sy(c as f64);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{c}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    for (t, anchor) in [(0.0, "start"), (x_max, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            sx(t),
            y0 + 16.0,
            format_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        axis_label(plot.unit())
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">cluster count</text>"#,
        H / 2.0,
        H / 2.0
    );

    let mut d = String::new();
    for (i, step) in plot.steps().iter().enumerate() {
        let (a, b, y) = (sx(step.start), sx(step.end), sy(step.count as f64));
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{a:.2},{y:.2} L{b:.2},{y:.2} ");
    }
    let _ = writeln!(
        out,
        r#"<path d="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
        d.trim_end()
    );
    out.push_str("</svg>\n");
    out
}

fn format_tick(t: f64) -> String {
    if t == 0.0 {
        "0".into()
    } else if t.abs() >= 100.0 {
        format!("{t:.0}")
    } else {
        format!("{t:.3}")
    }
}
