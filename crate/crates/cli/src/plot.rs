//! Minimal SVG 1.1 line plots of sweep aggregates.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{HarnessError, Result};
use crate::experiment::{Aggregate, SweepResult};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    Lfd,
    Psnr,
    Ssim,
}

impl PlotMetric {
    pub const ALL: [PlotMetric; 3] = [PlotMetric::Lfd, PlotMetric::Psnr, PlotMetric::Ssim];

    pub fn name(&self) -> &'static str {
        match self {
            PlotMetric::Lfd => "lfd",
            PlotMetric::Psnr => "psnr",
            PlotMetric::Ssim => "ssim",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            PlotMetric::Lfd => "LFD",
            PlotMetric::Psnr => "PSNR (dB)",
            PlotMetric::Ssim => "SSIM",
        }
    }

    fn value(&self, a: &Aggregate) -> f64 {
        match self {
            PlotMetric::Lfd => a.lfd.mean,
            PlotMetric::Psnr => a.psnr_db.mean,
            PlotMetric::Ssim => a.ssim.mean,
        }
    }
}

impl fmt::Display for PlotMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (expected lfd, psnr or ssim)"))
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pads a degenerate range so that a single value still maps inside the axes.
fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Renders one polyline (with point markers) per method over sweep values.
pub fn render_svg(result: &SweepResult, metric: PlotMetric, x_label: &str) -> Result<String> {
    let points: Vec<&Aggregate> = result
        .aggregates
        .iter()
        .filter(|a| metric.value(a).is_finite())
        .collect();
    if points.is_empty() {
        return Err(HarnessError::Invalid("nothing to plot: result has no finite aggregates".into()));
    }
    let mut methods: Vec<&str> = Vec::new();
    for a in &points {
        if !methods.contains(&a.method.as_str()) {
            methods.push(&a.method);
        }
    }
    let xs = points.iter().map(|a| a.sweep_value);
    let ys = points.iter().map(|a| metric.value(a));
    let (x0, x1) = span(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = span(ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(
            w,
            r#"<text x="{gx:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            gy + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        metric.label()
    );

    for (k, method) in methods.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|a| a.method == *method)
            .map(|a| (a.sweep_value, metric.value(a)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(method)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

pub fn emit_plot(result: &SweepResult, metric: PlotMetric, path: &Path) -> Result<()> {
    let svg = render_svg(result, metric, result.kind.axis_label())?;
    write_atomic(path, svg.as_bytes())
}
