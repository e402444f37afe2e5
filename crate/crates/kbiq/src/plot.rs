//! Minimal log-log SVG plots, written directly without a plotting dependency.

use std::io::Write;

use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
const REF_COLORS: &[&str] = &["#7f7f7f", "#bcbd22"];

/// One plotted series of positive `(x, y)` pairs.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Writes a log-log plot of the given series; dashed series are drawn as
/// reference lines.
pub fn write_loglog_svg(
    out: &mut dyn Write,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x_min = x_min.min(x.log10());
        x_max = x_max.max(x.log10());
        y_min = y_min.min(y.log10());
        y_max = y_max.max(y.log10());
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max - x_min < 1e-12 {
        x_max = x_min + 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x.log10() - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_max - y.log10()) / (y_max - y_min) * plot_h;

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        title
    )?;
    // axes box
    writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )?;
    // decade grid lines and tick labels
    for d in (x_min.floor() as i64)..=(x_max.ceil() as i64) {
        let x = 10f64.powi(d as i32);
        if x.log10() < x_min - 1e-9 || x.log10() > x_max + 1e-9 {
            continue;
        }
        let sx = px(x);
        writeln!(
            out,
            r##"<line x1="{sx}" y1="{MARGIN_TOP}" x2="{sx}" y2="{}" stroke="#dddddd"/>"##,
            MARGIN_TOP + plot_h
        )?;
        writeln!(
            out,
            r#"<text x="{sx}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">1e{d}</text>"#,
            MARGIN_TOP + plot_h + 16.0
        )?;
    }
    for d in (y_min.floor() as i64)..=(y_max.ceil() as i64) {
        let y = 10f64.powi(d as i32);
        if y.log10() < y_min - 1e-9 || y.log10() > y_max + 1e-9 {
            continue;
        }
        let sy = py(y);
        writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{sy}" x2="{}" y2="{sy}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + plot_w
        )?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">1e{d}</text>"#,
            MARGIN_LEFT - 6.0,
            sy + 4.0
        )?;
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        x_label
    )?;
    writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        y_label
    )?;

    let mut solid = 0usize;
    let mut dashed = 0usize;
    for (k, s) in series.iter().enumerate() {
        let color = if s.dashed {
            let c = REF_COLORS[dashed % REF_COLORS.len()];
            dashed += 1;
            c
        } else {
            let c = COLORS[solid % COLORS.len()];
            solid += 1;
            c
        };
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if path.len() >= 2 {
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                path.join(" ")
            )?;
        }
        for p in &path {
            let mut it = p.split(',');
            let (cx, cy) = (it.next().unwrap(), it.next().unwrap());
            if !s.dashed {
                writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#)?;
            }
        }
        let ly = MARGIN_TOP + 16.0 * (k as f64 + 1.0);
        let lx = MARGIN_LEFT + plot_w + 10.0;
        writeln!(
            out,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        )?;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 26.0,
            s.name
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
