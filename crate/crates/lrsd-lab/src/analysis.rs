//! Post-processing of ensemble results: decay times, scaling classes,
//! transition points and data collapse. All routines are deterministic
//! functions of their input.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Row;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no window satisfies the fit conditions")]
    NoValidWindow,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("curves do not cross")]
    NoCrossing,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

type Result<T> = std::result::Result<T, AnalysisError>;

// ---- ensembles ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(rename = "L")]
    pub l: usize,
    pub p_m: f64,
    pub eta: f64,
    pub beta: f64,
}

/// Mean and standard error of a recorded quantity at each time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEnsemble {
    pub key: GroupKey,
    pub t: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: Vec<usize>,
}

impl SeriesEnsemble {
    pub fn from_rows(key: GroupKey, rows: &[Row], value: impl Fn(&Row) -> Option<f64>) -> Self {
        let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in rows {
            if let Some(v) = value(r) {
                by_t.entry(r.t).or_default().push(v);
            }
        }
        let mut out = Self { key, t: Vec::new(), mean: Vec::new(), stderr: Vec::new(), count: Vec::new() };
        for (t, vs) in by_t {
            let (m, se) = mean_stderr(&vs);
            out.t.push(t);
            out.mean.push(m);
            out.stderr.push(se);
            out.count.push(vs.len());
        }
        out
    }

    pub fn times(&self) -> Vec<f64> {
        self.t.iter().map(|&t| t as f64).collect()
    }
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

// ---- fits ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    ExpDecay,
    Power,
    Area,
    Log,
}

impl FitModel {
    pub fn as_str(self) -> &'static str {
        match self {
            FitModel::ExpDecay => "exp-decay",
            FitModel::Power => "power",
            FitModel::Area => "area",
            FitModel::Log => "log",
        }
    }
}

/// One fitted model. For `exp-decay`, `a + b t` is the line through
/// `ln S`, so `τ = -1/b` and `A = e^a`; scaling models are `a + b L^γ` or
/// `a + b ln L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub a: f64,
    pub b: f64,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub tau_err: Option<f64>,
    pub amplitude: Option<f64>,
    pub chi2_dof: f64,
    pub r2: f64,
    pub dof: usize,
    pub window: Option<(f64, f64)>,
}

fn weights(err: &[f64]) -> Vec<f64> {
    if err.iter().all(|&e| e > 0.0 && e.is_finite()) {
        err.iter().map(|e| 1.0 / (e * e)).collect()
    } else {
        vec![1.0; err.len()]
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    a: f64,
    b: f64,
    chi2: f64,
    sxx: f64,
    syy: f64,
}

/// Weighted straight-line fit `y ≈ a + b x`, centered for stability.
/// `None` when `x` has no spread.
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Option<Line> {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - xm, y[i] - ym);
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if !(sxx > 1e-26 * scale * scale * sw) {
        return None;
    }
    let b = sxy / sxx;
    let a = ym - b * xm;
    let chi2 = (0..x.len()).map(|i| w[i] * (y[i] - a - b * x[i]).powi(2)).sum();
    Some(Line { a, b, chi2, sxx, syy })
}

fn weighted_constant(y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let ym = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let chi2: f64 = y.iter().zip(w).map(|(y, w)| w * (y - ym).powi(2)).sum();
    (ym, chi2, chi2)
}

/// Exponential decay time from the best window of `ln S(t)`.
///
/// Every window `[t_i, t_f]` spanning at least `L²/8`, with positive values
/// throughout and relative error below 0.35 at `t_f`, is fitted by least
/// squares (weighted by the errors of ln S); the window with the largest `R²` wins (ties go to the longer
/// window, then the earlier one).
pub fn fit_decay(t: &[f64], y: &[f64], err: &[f64], l: usize) -> Result<FitResult> {
    if t.len() != y.len() || t.len() != err.len() {
        return Err(AnalysisError::Precondition("series lengths differ".into()));
    }
    let n = t.len();
    let min_span = (l * l) as f64 / 8.0;
    let ln: Vec<f64> = y.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NAN }).collect();
    // Error of ln S is err/S. Selection and refit share these weights.
    let rel: Vec<f64> = (0..n).map(|k| if ln[k].is_finite() { err[k] / y[k] } else { 1.0 }).collect();
    let w_all = weights(&rel);
    // Weighted prefix sums give each window's R² in O(1).
    let mut ps = vec![[0.0f64; 6]; n + 1];
    for i in 0..n {
        let (x, v) = (t[i], if ln[i].is_finite() { ln[i] } else { 0.0 });
        let w = w_all[i];
        let p = ps[i];
        ps[i + 1] = [p[0] + w, p[1] + w * x, p[2] + w * v, p[3] + w * x * x, p[4] + w * x * v, p[5] + w * v * v];
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        if !ln[i].is_finite() {
            continue;
        }
        for j in i + 2..n {
            if !ln[j].is_finite() {
                break;
            }
            if t[j] - t[i] < min_span || !(err[j] / y[j] < 0.35) {
                continue;
            }
            let s: Vec<f64> = (0..6).map(|k| ps[j + 1][k] - ps[i][k]).collect();
            let sxx = s[3] - s[1] * s[1] / s[0];
            let sxy = s[4] - s[1] * s[2] / s[0];
            let syy = s[5] - s[2] * s[2] / s[0];
            if sxx <= 0.0 || sxy >= 0.0 {
                continue;
            }
            let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
            let better = match best {
                None => true,
                Some((br, bi, bj)) => r2 > br + 1e-12 || ((r2 - br).abs() <= 1e-12 && (j - i > bj - bi)),
            };
            if better {
                best = Some((r2, i, j));
            }
        }
    }
    let (_, i, j) = best.ok_or(AnalysisError::NoValidWindow)?;
    let tw = &t[i..=j];
    let lw = &ln[i..=j];
    let w = w_all[i..=j].to_vec();
    let line = wls(tw, lw, &w).ok_or_else(|| AnalysisError::DegenerateFit("window has one time".into()))?;
    let unit = wls(tw, lw, &vec![1.0; tw.len()]).expect("same abscissae");
    let r2 = if unit.syy > 0.0 { 1.0 - unit.chi2 / unit.syy } else { 1.0 };
    if !(line.b < 0.0) {
        return Err(AnalysisError::DegenerateFit(format!("window {}..{} does not decay", t[i], t[j])));
    }
    let dof = tw.len() - 2;
    let tau = -1.0 / line.b;
    let b_err = if w.iter().all(|&v| v == 1.0) {
        (unit.chi2 / dof as f64 / unit.sxx).sqrt()
    } else {
        (1.0 / line.sxx).sqrt()
    };
    Ok(FitResult {
        model: FitModel::ExpDecay,
        a: line.a,
        b: line.b,
        gamma: None,
        tau: Some(tau),
        tau_err: Some(b_err / (line.b * line.b)),
        amplitude: Some(line.a.exp()),
        chi2_dof: line.chi2 / dof as f64,
        r2,
        dof,
        window: Some((t[i], t[j])),
    })
}

/// The three scaling fits and the class with the smallest `χ²/dof`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFits {
    pub power: FitResult,
    pub area: FitResult,
    pub log: FitResult,
    pub class: FitModel,
}

impl ScalingFits {
    pub fn get(&self, m: FitModel) -> &FitResult {
        match m {
            FitModel::Power => &self.power,
            FitModel::Area => &self.area,
            _ => &self.log,
        }
    }
}

pub const POWER_BOUNDS: (f64, f64) = (1e-3, 4.0);
pub const AREA_BOUNDS: (f64, f64) = (-4.0, 0.0);
const STARTS: [f64; 7] = [0.25, 0.5, 1.0, 2.0, -0.25, -0.5, -1.0];

/// Golden-section search on `[a, b]`.
fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Local minimum near `x0` inside `[lo, hi]`: walk downhill with growing
/// steps to bracket, then golden section.
fn local_min(f: &dyn Fn(f64) -> f64, x0: f64, lo: f64, hi: f64) -> (f64, f64) {
    let x0 = x0.clamp(lo, hi);
    let f0 = f(x0);
    let mut h = 0.02 * (hi - lo);
    let dir = if f((x0 + h).min(hi)) < f0 {
        1.0
    } else if f((x0 - h).max(lo)) < f0 {
        -1.0
    } else {
        let (x, fx) = golden(f, (x0 - h).max(lo), (x0 + h).min(hi));
        return if fx < f0 { (x, fx) } else { (x0, f0) };
    };
    let (mut prev, mut cur, mut fcur) = (x0, x0, f0);
    loop {
        let next = (cur + dir * h).clamp(lo, hi);
        let fnext = f(next);
        if fnext >= fcur || next == cur {
            let (a, b) = if prev < next { (prev, next) } else { (next, prev) };
            let (x, fx) = golden(f, a, b);
            return if fx < fcur { (x, fx) } else { (cur, fcur) };
        }
        prev = cur;
        cur = next;
        fcur = fnext;
        if cur == lo || cur == hi {
            return (cur, fcur);
        }
        h *= 1.6;
    }
}

fn r2_of(y: &[f64], w: &[f64], chi2: f64) -> f64 {
    let (_, _, tot) = weighted_constant(y, w);
    if tot > 0.0 {
        1.0 - chi2 / tot
    } else {
        1.0
    }
}

fn power_family(l: &[f64], y: &[f64], w: &[f64], bounds: (f64, f64), model: FitModel) -> FitResult {
    let lnl: Vec<f64> = l.iter().map(|v| v.ln()).collect();
    let solve = |g: f64| -> (f64, f64, f64) {
        let x: Vec<f64> = lnl.iter().map(|u| (g * u).exp()).collect();
        match wls(&x, y, w) {
            Some(line) => (line.a, line.b, line.chi2),
            None => {
                let (a, chi2, _) = weighted_constant(y, w);
                (a, 0.0, chi2)
            }
        }
    };
    let chi = |g: f64| solve(g).2;
    let (lo, hi) = bounds;
    let mut best = (hi, chi(hi));
    for cand in [lo, hi] {
        let c = chi(cand);
        if c < best.1 {
            best = (cand, c);
        }
    }
    for &s in STARTS.iter().filter(|&&s| s >= lo && s <= hi) {
        let (x, fx) = local_min(&chi, s, lo, hi);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let (a, b, chi2) = solve(best.0);
    let dof = l.len() - 3;
    FitResult {
        model,
        a,
        b,
        gamma: Some(best.0),
        tau: None,
        tau_err: None,
        amplitude: None,
        chi2_dof: chi2 / dof as f64,
        r2: r2_of(y, w, chi2),
        dof,
        window: None,
    }
}

/// Fits `a + b L^γ` with `γ > 0` (power) and `γ ≤ 0` (area), and
/// `a + b ln L` (log), weighting by `1/err²` when every error is positive.
/// The class is the smallest `χ²/dof` among area and the growing (`b > 0`)
/// power and log fits. Equal `χ²/dof` (to 1e-9 relative) resolves to area, then log, then power.
pub fn fit_scaling(l: &[f64], y: &[f64], err: &[f64]) -> Result<ScalingFits> {
    if l.len() != y.len() || l.len() != err.len() {
        return Err(AnalysisError::Precondition("input lengths differ".into()));
    }
    let mut distinct: Vec<f64> = l.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(AnalysisError::DegenerateFit(format!("{} distinct sizes, need 4", distinct.len())));
    }
    if l.iter().chain(y).chain(err).any(|v| !v.is_finite()) || l.iter().any(|&v| v <= 0.0) {
        return Err(AnalysisError::DegenerateFit("non-finite or non-positive input".into()));
    }
    let w = weights(err);
    let power = power_family(l, y, &w, POWER_BOUNDS, FitModel::Power);
    let area = power_family(l, y, &w, AREA_BOUNDS, FitModel::Area);
    let lnl: Vec<f64> = l.iter().map(|v| v.ln()).collect();
    let line = wls(&lnl, y, &w).ok_or_else(|| AnalysisError::DegenerateFit("ln L has no spread".into()))?;
    let dof = l.len() - 2;
    let log = FitResult {
        model: FitModel::Log,
        a: line.a,
        b: line.b,
        gamma: None,
        tau: None,
        tau_err: None,
        amplitude: None,
        chi2_dof: line.chi2 / dof as f64,
        r2: r2_of(y, &w, line.chi2),
        dof,
        window: None,
    };
    // Power and log describe growth, so they only classify with b > 0.
    let eligible = |f: &&FitResult| f.model == FitModel::Area || f.b > 0.0;
    let min = [&area, &log, &power].into_iter().filter(eligible).map(|f| f.chi2_dof).fold(f64::INFINITY, f64::min);
    let tied = |f: &&FitResult| f.chi2_dof <= min * (1.0 + 1e-9) + 1e-24;
    let class = [&area, &log, &power].into_iter().filter(eligible).find(tied).map(|f| f.model).expect("area is eligible");
    Ok(ScalingFits { power, area, log, class })
}

// ---- transitions ----

/// All `x` where the piecewise-linear `g(x)` meets `level`.
fn level_crossings(x: &[f64], g: &[f64], level: f64) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for i in 0..x.len() {
        let d0 = g[i] - level;
        if d0 == 0.0 {
            out.push((x[i], i));
            continue;
        }
        if i + 1 < x.len() {
            let d1 = g[i + 1] - level;
            if d0 * d1 < 0.0 {
                out.push((x[i] + (x[i + 1] - x[i]) * d0 / (d0 - d1), i));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x_c: f64,
    pub sigma_a: f64,
    pub sigma_b: Option<f64>,
    pub sigma: f64,
}

fn ln_f(e_ext: &[f64], e_area: &[f64]) -> Vec<f64> {
    e_ext
        .iter()
        .zip(e_area)
        .map(|(&a, &b)| (a.max(f64::MIN_POSITIVE) / b.max(f64::MIN_POSITIVE)).ln())
        .collect()
}

fn zero_of_ln_f(x: &[f64], g: &[f64]) -> Result<(f64, usize)> {
    level_crossings(x, g, 0.0).first().copied().ok_or(AnalysisError::NoCrossing)
}

/// Locates `ln F = 0` with `F = E_ext / E_area` on a sorted grid.
///
/// `σ_A` is half the distance between the `ln F = ±1` crossings nearest to
/// `x_c` (the grid edge stands in for a missing one); `σ_B` compares with
/// the curves recomputed without the largest size, when given.
pub fn locate_transition(
    x: &[f64],
    e_ext: &[f64],
    e_area: &[f64],
    dropped: Option<(&[f64], &[f64])>,
) -> Result<Transition> {
    if x.len() < 2 || x.len() != e_ext.len() || x.len() != e_area.len() {
        return Err(AnalysisError::Precondition("need matching curves on ≥ 2 grid points".into()));
    }
    let g = ln_f(e_ext, e_area);
    let (x_c, seg) = zero_of_ln_f(x, &g)?;
    let up = if seg + 1 < g.len() { g[seg + 1] >= g[seg] } else { g[seg] >= g[seg.saturating_sub(1)] };
    let (x_lo, x_hi) = (x[0], x[x.len() - 1]);
    let side = |level: f64| -> f64 {
        let right = (level > 0.0) == up;
        let hits = level_crossings(x, &g, level);
        let pick = hits
            .iter()
            .map(|h| h.0)
            .filter(|&h| if right { h >= x_c } else { h <= x_c })
            .min_by(|a, b| (a - x_c).abs().total_cmp(&(b - x_c).abs()));
        pick.unwrap_or(if right { x_hi } else { x_lo })
    };
    let sigma_a = (side(1.0) - side(-1.0)).abs() / 2.0;
    let sigma_b = match dropped {
        Some((de, da)) => {
            if de.len() != x.len() || da.len() != x.len() {
                return Err(AnalysisError::Precondition("dropped curves off the grid".into()));
            }
            Some((x_c - zero_of_ln_f(x, &ln_f(de, da))?.0).abs())
        }
        None => None,
    };
    let sigma = (sigma_a * sigma_a + sigma_b.unwrap_or(0.0).powi(2)).sqrt();
    Ok(Transition { x_c, sigma_a, sigma_b, sigma })
}

/// Scaling point at one control value `x`: `(L, y, err)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub x: f64,
    pub data: Vec<(f64, f64, f64)>,
}

fn fits_of(data: &[(f64, f64, f64)]) -> Result<ScalingFits> {
    let l: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();
    let e: Vec<f64> = data.iter().map(|d| d.2).collect();
    fit_scaling(&l, &y, &e)
}

/// Runs [`fit_scaling`] at every grid point and locates where the power and
/// area fits exchange. `σ_B` needs at least five sizes.
pub fn scaling_transition(points: &[ScalingPoint]) -> Result<(Transition, Vec<ScalingFits>)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let fits = pts.iter().map(|p| fits_of(&p.data)).collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ext: Vec<f64> = fits.iter().map(|f| f.power.chi2_dof).collect();
    let area: Vec<f64> = fits.iter().map(|f| f.area.chi2_dof).collect();
    let dropped = if pts.iter().all(|p| p.data.len() >= 5) {
        let sub = pts
            .iter()
            .map(|p| {
                let lmax = p.data.iter().map(|d| d.0).fold(f64::MIN, f64::max);
                let kept: Vec<_> = p.data.iter().copied().filter(|d| d.0 < lmax).collect();
                fits_of(&kept)
            })
            .collect::<Result<Vec<_>>>()?;
        Some((
            sub.iter().map(|f| f.power.chi2_dof).collect::<Vec<_>>(),
            sub.iter().map(|f| f.area.chi2_dof).collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    let t = locate_transition(&x, &ext, &area, dropped.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())))?;
    Ok((t, fits))
}

/// `y` against `x` for one system size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    #[serde(rename = "L")]
    pub l: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub p_c: f64,
    pub sigma: f64,
    pub points: Vec<f64>,
}

fn interp(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let k = x.partition_point(|&v| v < at);
    if k < x.len() && x[k] == at {
        return Some(y[k]);
    }
    let (x0, x1) = (x[k - 1], x[k]);
    Some(y[k - 1] + (y[k] - y[k - 1]) * (at - x0) / (x1 - x0))
}

/// Pairwise intersections of the curves (each curve's points sorted by `x`,
/// the second curve interpolated onto the first's grid). Every intersection
/// counts; `p_c` is their mean and `σ` their standard deviation.
pub fn crossing(curves: &[Curve]) -> Result<Crossing> {
    if curves.len() < 2 {
        return Err(AnalysisError::Precondition("need at least two curves".into()));
    }
    let sorted: Vec<(Vec<f64>, Vec<f64>)> = curves
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..c.x.len()).collect();
            idx.sort_by(|&a, &b| c.x[a].total_cmp(&c.x[b]));
            (idx.iter().map(|&i| c.x[i]).collect(), idx.iter().map(|&i| c.y[i]).collect())
        })
        .collect();
    let mut points = Vec::new();
    for a in 0..sorted.len() {
        for b in a + 1..sorted.len() {
            let (xa, ya) = &sorted[a];
            let (xb, yb) = &sorted[b];
            let (xs, ds): (Vec<f64>, Vec<f64>) =
                xa.iter().zip(ya).filter_map(|(&x, &y)| interp(xb, yb, x).map(|v| (x, y - v))).unzip();
            points.extend(level_crossings(&xs, &ds, 0.0).into_iter().map(|c| c.0));
        }
    }
    if points.is_empty() {
        return Err(AnalysisError::NoCrossing);
    }
    let n = points.len() as f64;
    let p_c = points.iter().sum::<f64>() / n;
    let sigma = (points.iter().map(|p| (p - p_c).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Crossing { p_c, sigma, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflectionScale {
    /// `ln y` against `ln L`: a power law is a straight line (decay times).
    LogLog,
    /// `y` against `ln L`: logarithmic growth is a straight line (entropies).
    LinLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inflection {
    pub p_c: f64,
    /// Slope at `p_c`: the exponent for `LogLog`, the log prefactor for `LinLog`.
    pub slope: f64,
    /// `(p, curvature)` per control value.
    pub curvature: Vec<(f64, f64)>,
}

/// Least-squares quadratic `c0 + c1 u + c2 u²` with `u` centered on its
/// mean; returns `(c0, c1, c2)` in the centered variable.
fn quadratic_fit(u: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let n = u.len() as f64;
    let um = u.iter().sum::<f64>() / n;
    let mut m = [[0.0f64; 4]; 3];
    for (&ui, &yi) in u.iter().zip(y) {
        let d = ui - um;
        let row = [1.0, d, d * d];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += row[r] * row[c];
            }
            m[r][3] += row[r] * yi;
        }
    }
    solve3(m)
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let out = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Finds where the curvature of `y(L)` against `ln L` changes sign.
///
/// At each control value a quadratic in `ln L` is fitted (needs ≥ 3 sizes);
/// `p_c` is the first sign change of the quadratic coefficient, and the
/// linear coefficient interpolated there is the critical slope.
pub fn inflection(points: &[ScalingPoint], scale: InflectionScale) -> Result<Inflection> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut xs = Vec::new();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for p in &pts {
        if p.data.len() < 3 {
            return Err(AnalysisError::Precondition(format!("x = {}: need 3 sizes", p.x)));
        }
        let u: Vec<f64> = p.data.iter().map(|d| d.0.ln()).collect();
        let y: Vec<f64> = match scale {
            InflectionScale::LogLog => p.data.iter().map(|d| d.1.ln()).collect(),
            InflectionScale::LinLog => p.data.iter().map(|d| d.1).collect(),
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::Precondition(format!("x = {}: non-finite value", p.x)));
        }
        let c = quadratic_fit(&u, &y).ok_or_else(|| AnalysisError::DegenerateFit(format!("x = {}", p.x)))?;
        xs.push(p.x);
        c1.push(c[1]);
        c2.push(c[2]);
    }
    let (p_c, seg) = level_crossings(&xs, &c2, 0.0).first().copied().ok_or(AnalysisError::NoCrossing)?;
    let slope = if seg + 1 < xs.len() && p_c != xs[seg] {
        let f = (p_c - xs[seg]) / (xs[seg + 1] - xs[seg]);
        c1[seg] + f * (c1[seg + 1] - c1[seg])
    } else {
        c1[seg]
    };
    Ok(Inflection { p_c, slope, curvature: xs.into_iter().zip(c2).collect() })
}

// ---- collapse ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoint {
    #[serde(rename = "L")]
    pub l: f64,
    pub x: f64,
    pub y: f64,
}

/// `x_s = (x - x_c) L^{x_exp}`, `y_s = y L^{-y_exp}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ansatz {
    pub x_c: f64,
    pub x_exp: f64,
    pub y_exp: f64,
}

const WINDOW: usize = 7;

fn check_sizes(data: &[CollapsePoint]) -> Result<()> {
    let mut ls: Vec<f64> = data.iter().map(|p| p.l).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    if ls.len() < 3 {
        return Err(AnalysisError::Precondition(format!("{} sizes, collapse needs 3", ls.len())));
    }
    Ok(())
}

/// Mean squared deviation of each rescaled point from a local quadratic
/// through the 7 nearest rescaled points of the other sizes, divided by the
/// variance of all rescaled `y` so rescaling `y` cannot shrink it. Points
/// outside the other sizes' range do not contribute.
pub fn collapse_quality(data: &[CollapsePoint], ansatz: Ansatz) -> Result<f64> {
    check_sizes(data)?;
    Ok(quality_unchecked(data, ansatz))
}

fn quality_unchecked(data: &[CollapsePoint], a: Ansatz) -> f64 {
    let scaled: Vec<(f64, f64, f64)> =
        data.iter().map(|p| (p.l, (p.x - a.x_c) * p.l.powf(a.x_exp), p.y * p.l.powf(-a.y_exp))).collect();
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&i, &j| scaled[i].1.total_cmp(&scaled[j].1));
    let (mut sum, mut count) = (0.0, 0usize);
    let mut xs = Vec::with_capacity(scaled.len());
    let mut ys = Vec::with_capacity(scaled.len());
    for &(l, x, y) in &scaled {
        xs.clear();
        ys.clear();
        for &k in &order {
            if scaled[k].0 != l {
                xs.push(scaled[k].1);
                ys.push(scaled[k].2);
            }
        }
        if xs.len() < WINDOW || x < xs[0] || x > xs[xs.len() - 1] {
            continue;
        }
        let pos = xs.partition_point(|&v| v < x);
        let start = pos.saturating_sub(WINDOW / 2).min(xs.len() - WINDOW);
        let wx = &xs[start..start + WINDOW];
        let wy = &ys[start..start + WINDOW];
        let width = (wx[WINDOW - 1] - wx[0]).max(1e-300);
        let u: Vec<f64> = wx.iter().map(|v| (v - x) / width).collect();
        let pred = match quadratic_fit(&u, wy) {
            Some(c) => {
                let um = u.iter().sum::<f64>() / u.len() as f64;
                c[0] + c[1] * (-um) + c[2] * um * um
            }
            None => wy.iter().sum::<f64>() / WINDOW as f64,
        };
        sum += (y - pred).powi(2);
        count += 1;
    }
    if count == 0 {
        return f64::INFINITY;
    }
    let (_, var_sum, _) = weighted_constant(&scaled.iter().map(|s| s.2).collect::<Vec<_>>(), &vec![1.0; scaled.len()]);
    let var = var_sum / scaled.len() as f64;
    if var <= 0.0 {
        return f64::INFINITY;
    }
    sum / count as f64 / var
}

/// Search box for [`optimize_collapse`]; a parameter with `lo == hi` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseBounds {
    pub x_c: (f64, f64),
    pub x_exp: (f64, f64),
    pub y_exp: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub ansatz: Ansatz,
    pub quality: f64,
}

fn get(a: &Ansatz, k: usize) -> f64 {
    [a.x_c, a.x_exp, a.y_exp][k]
}

fn with(a: Ansatz, k: usize, v: f64) -> Ansatz {
    let mut b = a;
    match k {
        0 => b.x_c = v,
        1 => b.x_exp = v,
        _ => b.y_exp = v,
    }
    b
}

/// Grid search with `grid` points per free parameter, then Powell's method
/// (golden-section line searches along adaptive directions) from the best
/// grid point, clamped to the box.
pub fn optimize_collapse(data: &[CollapsePoint], bounds: CollapseBounds, grid: usize) -> Result<CollapseFit> {
    check_sizes(data)?;
    let grid = grid.max(2);
    let b = [bounds.x_c, bounds.x_exp, bounds.y_exp];
    let free: Vec<usize> = (0..3).filter(|&k| b[k].1 > b[k].0).collect();
    let axis = |k: usize, i: usize| b[k].0 + (b[k].1 - b[k].0) * i as f64 / (grid - 1) as f64;
    let start = Ansatz { x_c: b[0].0, x_exp: b[1].0, y_exp: b[2].0 };
    let mut best = (start, quality_unchecked(data, start));
    let total = grid.pow(free.len() as u32);
    for idx in 0..total {
        let mut a = start;
        let mut r = idx;
        for &k in &free {
            a = with(a, k, axis(k, r % grid));
            r /= grid;
        }
        let q = quality_unchecked(data, a);
        if q < best.1 {
            best = (a, q);
        }
    }
    if free.is_empty() {
        return Ok(CollapseFit { ansatz: best.0, quality: best.1 });
    }

    // Work in box-normalized coordinates so every direction has unit scale.
    let dim = free.len();
    let to_ansatz = |u: &[f64]| {
        let mut a = best.0;
        for (i, &k) in free.iter().enumerate() {
            a = with(a, k, b[k].0 + u[i].clamp(0.0, 1.0) * (b[k].1 - b[k].0));
        }
        a
    };
    let q = |u: &[f64]| quality_unchecked(data, to_ansatz(u));
    let mut u: Vec<f64> = free.iter().map(|&k| (get(&best.0, k) - b[k].0) / (b[k].1 - b[k].0)).collect();
    let mut fu = best.1;
    let mut dirs: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| (i == j) as u8 as f64).collect()).collect();
    let line = |u: &[f64], d: &[f64]| -> (f64, f64) {
        // Range of s keeping u + s d inside the unit box.
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..u.len() {
            if d[i] != 0.0 {
                let (a, c) = ((0.0 - u[i]) / d[i], (1.0 - u[i]) / d[i]);
                lo = lo.max(a.min(c));
                hi = hi.min(a.max(c));
            }
        }
        let g = |s: f64| q(&u.iter().zip(d).map(|(x, y)| x + s * y).collect::<Vec<_>>());
        local_min(&g, 0.0, lo, hi)
    };
    for _ in 0..60 {
        let u0 = u.clone();
        let f0 = fu;
        let (mut big, mut big_i) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let (s, fs) = line(&u, d);
            if fs < fu {
                if fu - fs > big {
                    big = fu - fs;
                    big_i = i;
                }
                u = u.iter().zip(d).map(|(x, y)| x + s * y).collect();
                fu = fs;
            }
        }
        let shift: Vec<f64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
        let norm = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let d: Vec<f64> = shift.iter().map(|v| v / norm).collect();
            let (s, fs) = line(&u, &d);
            if fs < fu {
                u = u.iter().zip(&d).map(|(x, y)| x + s * y).collect();
                fu = fs;
            }
            dirs.remove(big_i);
            dirs.push(d);
        }
        if f0 - fu <= 1e-15 * f0.abs() + 1e-300 {
            break;
        }
    }
    if fu < best.1 {
        best = (to_ansatz(&u), fu);
    }
    Ok(CollapseFit { ansatz: best.0, quality: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_stderr(&[1.0]).1, 0.0);
    }

    #[test]
    fn decay_rejects_short_series() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (-t / 5.0).exp()).collect();
        let e = vec![1e-3; 10];
        assert_eq!(fit_decay(&t, &y, &e, 16), Err(AnalysisError::NoValidWindow));
    }

    #[test]
    fn transition_on_linear_ratio() {
        let x: Vec<f64> = (0..21).map(|i| 1.0 + 0.1 * i as f64).collect();
        let ext: Vec<f64> = x.iter().map(|x| (x - 2.0f64).exp()).collect();
        let area = vec![1.0; x.len()];
        let t = locate_transition(&x, &ext, &area, None).unwrap();
        assert!((t.x_c - 2.0).abs() < 1e-12);
        assert!((t.sigma_a - 1.0).abs() < 1e-12);
        let flat = vec![2.0; x.len()];
        assert_eq!(locate_transition(&x, &flat, &area, None), Err(AnalysisError::NoCrossing));
    }

    #[test]
    fn quadratic_recovers_coefficients() {
        let u = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = u.iter().map(|u| 1.0 + 2.0 * u - 0.5 * u * u).collect();
        let c = quadratic_fit(&u, &y).unwrap();
        assert!((c[2] + 0.5).abs() < 1e-12);
    }
}
