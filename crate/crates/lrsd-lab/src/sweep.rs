//! Parameter sweeps: one record CSV and summary per grid point, plus a
//! manifest. Rerunning skips points whose files are complete and match
//! their configuration hash.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{grid_points, GridAxis, RunConfig};
use crate::error::Result;
use crate::io::{self, Discarded};
use crate::runner::run_ensemble;

pub const MANIFEST_FORMAT: &str = "lrsd-lab-manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    pub overrides: Vec<(String, f64)>,
    pub config_hash: String,
    pub csv: String,
    pub summary: String,
    pub discarded: Vec<Discarded>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub base_config_hash: String,
    pub grid: Vec<GridAxis>,
    pub points: Vec<PointEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub computed: Vec<usize>,
    pub reused: Vec<usize>,
}

fn stem(index: usize) -> String {
    format!("point-{index:04}")
}

/// The stored point, if its CSV and summary load cleanly and match `cfg`.
fn existing(dir: &Path, index: usize, cfg: &RunConfig) -> Option<Vec<Discarded>> {
    let path = dir.join(format!("{}.csv", stem(index)));
    let run = io::load_run(&path).ok()?;
    let summary = run.summary?;
    (run.records.hash == cfg.hash()).then_some(summary.discarded)
}

/// Runs every grid point not already present in `out`, rewriting the
/// manifest after each one.
pub fn sweep(
    base: &RunConfig,
    axes: &[GridAxis],
    out: &Path,
    threads: usize,
    mut progress: impl FnMut(usize, bool),
) -> Result<SweepReport> {
    std::fs::create_dir_all(out)?;
    let points = grid_points(axes);
    let configs = points
        .iter()
        .map(|p| {
            let mut c = base.clone();
            for &(k, v) in p {
                c.set(k, v)?;
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        base_config_hash: base.hash(),
        grid: axes.to_vec(),
        points: Vec::new(),
    };
    let mut report = SweepReport::default();
    for (i, (p, cfg)) in points.iter().zip(&configs).enumerate() {
        let discarded = match existing(out, i, cfg) {
            Some(d) => {
                report.reused.push(i);
                progress(i, false);
                d
            }
            None => {
                let records = run_ensemble(cfg, threads)?;
                let csv = io::write_run(out, &stem(i), cfg, &records)?;
                report.computed.push(i);
                progress(i, true);
                io::read_summary(&io::summary_path(&csv))?.discarded
            }
        };
        manifest.points.push(PointEntry {
            index: i,
            overrides: p.iter().map(|&(k, v)| (k.as_str().to_string(), v)).collect(),
            config_hash: cfg.hash(),
            csv: format!("{}.csv", stem(i)),
            summary: format!("{}.summary.json", stem(i)),
            discarded,
        });
        std::fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok(report)
}
