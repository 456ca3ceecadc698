//! Reduces loaded runs to per-run observables and groups them into the
//! curves and scaling points the analysis routines take.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_decay, mean_stderr, CollapsePoint, Curve, FitResult, GroupKey, ScalingPoint, SeriesEnsemble};
use crate::error::{LabError, Result};
use crate::io::{RunData, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Largest cluster of the final graph state.
    NMax,
    /// Max-min entanglement entropy.
    SMm,
    /// Stabilizer nullity from Bell sampling.
    Nullity,
    /// Nullity divided by ln L.
    NullityPerLog,
    /// Decay time of the ancilla entropy.
    Tau,
    /// Final entry count of the decomposition.
    Entries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Control {
    #[value(name = "p_m")]
    #[serde(rename = "p_m")]
    PM,
    Eta,
    Beta,
}

impl Control {
    pub fn of(self, run: &RunData) -> f64 {
        let c = run.config();
        match self {
            Control::PM => c.p_m,
            Control::Eta => c.eta,
            Control::Beta => c.beta,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Control::PM => "p_m",
            Control::Eta => "eta",
            Control::Beta => "beta",
        }
    }
}

pub fn group_key(run: &RunData) -> GroupKey {
    let c = run.config();
    GroupKey { l: c.l, p_m: c.p_m, eta: c.eta, beta: c.beta }
}

pub fn s_q_series(run: &RunData) -> SeriesEnsemble {
    SeriesEnsemble::from_rows(group_key(run), &run.records.rows, |r| r.s_q)
}

pub fn decay_fit(run: &RunData) -> Result<FitResult> {
    let s = s_q_series(run);
    Ok(fit_decay(&s.times(), &s.mean, &s.stderr, run.config().l)?)
}

fn summary(run: &RunData) -> Result<&Summary> {
    run.summary
        .as_ref()
        .ok_or_else(|| LabError::SchemaMismatch(format!("{} has no summary file", run.path.display())))
}

/// Mean and standard error of `obs` over the run's trajectories; `None`
/// when the run carries no value for it.
pub fn observable(run: &RunData, obs: Observable) -> Result<Option<(f64, f64)>> {
    let stats = |v: Vec<f64>| (!v.is_empty()).then(|| mean_stderr(&v));
    let l = run.config().l as f64;
    Ok(match obs {
        Observable::NMax => stats(summary(run)?.trajectories.iter().filter_map(|t| t.n_max.map(|v| v as f64)).collect()),
        Observable::SMm => stats(summary(run)?.trajectories.iter().filter_map(|t| t.s_mm).collect()),
        Observable::Nullity | Observable::NullityPerLog => {
            let scale = if obs == Observable::NullityPerLog { 1.0 / l.ln() } else { 1.0 };
            stats(summary(run)?.trajectories.iter().filter_map(|t| t.nullity.map(|v| v as f64 * scale)).collect())
        }
        Observable::Tau => match decay_fit(run) {
            Ok(f) => Some((f.tau.expect("decay fits carry τ"), f.tau_err.unwrap_or(0.0))),
            Err(LabError::Analysis(_)) => None,
            Err(e) => return Err(e),
        },
        Observable::Entries => {
            let mut last: BTreeMap<u64, (usize, u64)> = BTreeMap::new();
            for r in &run.records.rows {
                let e = last.entry(r.traj).or_insert((r.t, r.entries));
                if r.t >= e.0 {
                    *e = (r.t, r.entries);
                }
            }
            stats(last.values().map(|v| v.1 as f64).collect())
        }
    })
}

/// One entry per run: `(L, control, mean, stderr)`, sorted by `L` then control.
pub fn table(runs: &[RunData], obs: Observable, control: Control) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mut out = Vec::new();
    for r in runs {
        if let Some((m, e)) = observable(r, obs)? {
            out.push((r.config().l, control.of(r), m, e));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(out)
}

/// Curves of `obs · L^{-rescale}` against the control, one per size.
pub fn curves(runs: &[RunData], obs: Observable, control: Control, rescale: f64) -> Result<Vec<Curve>> {
    let mut by_l: BTreeMap<usize, Curve> = BTreeMap::new();
    for (l, x, m, _) in table(runs, obs, control)? {
        let c = by_l.entry(l).or_insert_with(|| Curve { l: l as f64, x: Vec::new(), y: Vec::new() });
        c.x.push(x);
        c.y.push(m * (l as f64).powf(-rescale));
    }
    Ok(by_l.into_values().collect())
}

/// Scaling data `(L, mean, stderr)` grouped by control value.
pub fn scaling_points(runs: &[RunData], obs: Observable, control: Control) -> Result<Vec<ScalingPoint>> {
    let mut by_x: BTreeMap<u64, ScalingPoint> = BTreeMap::new();
    for (l, x, m, e) in table(runs, obs, control)? {
        by_x.entry(x.to_bits()).or_insert_with(|| ScalingPoint { x, data: Vec::new() }).data.push((l as f64, m, e));
    }
    let mut pts: Vec<ScalingPoint> = by_x.into_values().collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(pts)
}

pub fn collapse_points(runs: &[RunData], obs: Observable, control: Control) -> Result<Vec<CollapsePoint>> {
    Ok(table(runs, obs, control)?.into_iter().map(|(l, x, y, _)| CollapsePoint { l: l as f64, x, y }).collect())
}
