//! Minimal standalone SVG line plots for sweep summaries and ambiguity
//! curves. Hand-rolled on purpose: a couple of polylines, axes and ticks
//! cover everything the CLI emits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 62.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    pub color: &'a str,
}

/// Optional shaded band (x, low, high), drawn behind the lines.
pub struct Band<'a> {
    pub points: &'a [(f64, f64, f64)],
    pub color: &'a str,
}

pub fn line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    band: Option<&Band<'_>>,
) -> Result<()> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in s.points {
            if x.is_finite() && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if let Some(b) = band {
        for &(x, lo, hi) in b.points {
            if x.is_finite() && lo.is_finite() && hi.is_finite() {
                xs.push(x);
                ys.push(lo);
                ys.push(hi);
            }
        }
    }
    let (x0, x1) = padded_range(&xs);
    let (y0, y1) = padded_range(&ys);
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);
        (px, py)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();

    // Axes box and ticks.
    writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    )
    .unwrap();
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let (px, _) = to_px(fx, y0);
        writeln!(
            svg,
            r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="lightgray" stroke-width="0.5"/>"#,
            MARGIN_T,
            HEIGHT - MARGIN_B
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 18.0,
            tick_label(fx)
        )
        .unwrap();
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        let (_, py) = to_px(x0, fy);
        writeln!(
            svg,
            r#"<line x1="{MARGIN_L}" y1="{py}" x2="{}" y2="{py}" stroke="lightgray" stroke-width="0.5"/>"#,
            WIDTH - MARGIN_R
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            py + 4.0,
            tick_label(fy)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();

    if let Some(b) = band {
        let mut d = String::new();
        for (i, &(x, lo, _)) in b.points.iter().enumerate() {
            let (px, py) = to_px(x, lo);
            write!(d, "{}{px:.2},{py:.2} ", if i == 0 { "M" } else { "L" }).unwrap();
        }
        for &(x, _, hi) in b.points.iter().rev() {
            let (px, py) = to_px(x, hi);
            write!(d, "L{px:.2},{py:.2} ").unwrap();
        }
        writeln!(
            svg,
            r#"<path d="{d}Z" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
            b.color
        )
        .unwrap();
    }

    for s in series {
        let mut d = String::new();
        let mut first = true;
        for &(x, y) in s.points {
            if !x.is_finite() || !y.is_finite() {
                first = true;
                continue;
            }
            let (px, py) = to_px(x, y);
            write!(d, "{}{px:.2},{py:.2} ", if first { "M" } else { "L" }).unwrap();
            first = false;
        }
        writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
            s.color
        )
        .unwrap();
    }

    // Legend (top-right corner, one row per series).
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 16.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R - 150.0;
        writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
            x + 22.0,
            s.color
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 28.0,
            y + 4.0,
            escape(s.label)
        )
        .unwrap();
    }

    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
