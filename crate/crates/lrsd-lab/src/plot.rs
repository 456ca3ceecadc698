//! Deterministic SVG line plots. The output depends only on the plotted
//! data; a SHA-256 digest of that data is embedded as metadata.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::analysis::Ansatz;
use crate::error::{LabError, Result};
use crate::io::RunData;
use crate::observe::{self, Control, Observable};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Digest of the series data, independent of styling.
pub fn data_digest(spec: &PlotSpec) -> String {
    let mut h = Sha256::new();
    for s in &spec.series {
        h.update(s.label.as_bytes());
        h.update([0]);
        for &(x, y) in &s.points {
            h.update(x.to_le_bytes());
            h.update(y.to_le_bytes());
        }
        h.update([0xff]);
    }
    hex::encode(h.finalize())
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.floor() as i32, hi.ceil() as i32);
        let step = ((b - a) / 6).max(1);
        return (a..=b).step_by(step as usize).map(f64::from).filter(|&t| t >= lo && t <= hi).collect();
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v as i32);
    }
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = spec
        .series
        .iter()
        .map(|s| {
            s.points.iter().map(|&(x, y)| (tx(x), ty(y))).filter(|(x, y)| x.is_finite() && y.is_finite()).collect()
        })
        .collect();
    let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
    if all.is_empty() {
        return Err(LabError::SchemaMismatch("nothing to plot".into()));
    }
    let range = |f: &dyn Fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = range(&|p| p.0);
    let (y0, y1) = range(&|p| p.1);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<metadata>data-sha256:{}</metadata>"#, data_digest(spec));
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(&spec.title));
    let _ = writeln!(
        o,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1, spec.log_x) {
        let x = sx(t);
        let _ = writeln!(o, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(
            o,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick_label(t, spec.log_x)
        );
    }
    for t in ticks(y0, y1, spec.log_y) {
        let y = sy(t);
        let _ = writeln!(o, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t, spec.log_y)
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        esc(&spec.x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(&spec.y_label)
    );
    for (i, (s, p)) in spec.series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if p.len() > 1 {
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                o,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
        }
        if s.markers {
            for &(x, y) in p {
                let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = writeln!(o, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 24.0, esc(&s.label));
    }
    o.push_str("</svg>\n");
    Ok(o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Decay,
    Crossing,
    Collapse,
    Scaling,
}

fn run_label(r: &RunData) -> String {
    let c = r.config();
    format!("L={} p_m={} eta={} beta={}", c.l, c.p_m, c.eta, c.beta)
}

/// Ancilla entropy against time on a log scale, with the fitted window.
pub fn decay_spec(runs: &[RunData]) -> Result<PlotSpec> {
    let mut series = Vec::new();
    for r in runs {
        let s = observe::s_q_series(r);
        let points: Vec<(f64, f64)> = s.times().into_iter().zip(s.mean.iter().copied()).filter(|p| p.1 > 0.0).collect();
        if points.is_empty() {
            continue;
        }
        series.push(Series { label: run_label(r), points, dashed: false, markers: true });
        if let Ok(f) = observe::decay_fit(r) {
            let (ti, tf) = f.window.expect("decay fits carry a window");
            let line = |t: f64| (f.a + f.b * t).exp();
            series.push(Series {
                label: format!("fit tau={:.3}", f.tau.expect("decay fits carry τ")),
                points: vec![(ti, line(ti)), (tf, line(tf))],
                dashed: true,
                markers: false,
            });
        }
    }
    if series.is_empty() {
        return Err(LabError::SchemaMismatch("no positive S_Q samples".into()));
    }
    Ok(PlotSpec {
        title: "ancilla entropy decay".into(),
        x_label: "t".into(),
        y_label: "S_Q".into(),
        log_x: false,
        log_y: true,
        series,
    })
}

/// Observable (optionally rescaled by `L^{-rescale}`) against the control, one curve per size.
pub fn crossing_spec(runs: &[RunData], obs: Observable, control: Control, rescale: f64) -> Result<PlotSpec> {
    let curves = observe::curves(runs, obs, control, rescale)?;
    let series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            label: format!("L={}", c.l),
            points: c.x.iter().copied().zip(c.y.iter().copied()).collect(),
            dashed: false,
            markers: true,
        })
        .collect();
    let y_label = if rescale != 0.0 { format!("{obs:?} L^-{rescale}") } else { format!("{obs:?}") };
    Ok(PlotSpec {
        title: format!("{obs:?} against {}", control.label()),
        x_label: control.label().into(),
        y_label,
        log_x: false,
        log_y: false,
        series,
    })
}

pub fn collapse_spec(runs: &[RunData], obs: Observable, control: Control, a: Ansatz) -> Result<PlotSpec> {
    let curves = observe::curves(runs, obs, control, 0.0)?;
    let series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            label: format!("L={}", c.l),
            points: c
                .x
                .iter()
                .zip(&c.y)
                .map(|(&x, &y)| ((x - a.x_c) * c.l.powf(a.x_exp), y * c.l.powf(-a.y_exp)))
                .collect(),
            dashed: false,
            markers: true,
        })
        .collect();
    Ok(PlotSpec {
        title: format!("collapse x_c={:.4} x_exp={:.4} y_exp={:.4}", a.x_c, a.x_exp, a.y_exp),
        x_label: format!("({} - x_c) L^x_exp", control.label()),
        y_label: format!("{obs:?} L^-y_exp"),
        log_x: false,
        log_y: false,
        series,
    })
}

/// Observable against `L` on log-log axes, one curve per control value, with
/// a dashed `2^L` reference.
pub fn scaling_spec(runs: &[RunData], obs: Observable, control: Control) -> Result<PlotSpec> {
    let pts = observe::scaling_points(runs, obs, control)?;
    let mut series: Vec<Series> = pts
        .iter()
        .map(|p| Series {
            label: format!("{}={}", control.label(), p.x),
            points: p.data.iter().map(|d| (d.0, d.1)).collect(),
            dashed: false,
            markers: true,
        })
        .collect();
    let mut ls: Vec<f64> = pts.iter().flat_map(|p| p.data.iter().map(|d| d.0)).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    if !ls.is_empty() {
        series.push(Series { label: "2^L".into(), points: ls.iter().map(|&l| (l, l.exp2())).collect(), dashed: true, markers: false });
    }
    Ok(PlotSpec {
        title: format!("{obs:?} against L"),
        x_label: "L".into(),
        y_label: format!("{obs:?}"),
        log_x: true,
        log_y: true,
        series,
    })
}
