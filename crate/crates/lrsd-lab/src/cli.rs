//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lrsd_core::circuits::{run_trajectory_with_state, trajectory_rng, Engine};
use lrsd_core::graphstate::to_graph_state;
use lrsd_core::magic::{bell_sample, build_bell_form};
use serde::Serialize;

use crate::analysis::{
    crossing, inflection, optimize_collapse, scaling_transition, Ansatz, CollapseBounds, FitResult,
    InflectionScale, ScalingFits,
};
use crate::config::{GridAxis, ModelName, RunConfig};
use crate::error::{LabError, Result};
use crate::io::{self, StateJson, TableauJson};
use crate::observe::{self, Control, Observable};
use crate::plot::{self, PlotKind};
use crate::runner::{resolve_threads, run_ensemble};
use crate::sweep::sweep;
use crate::verify::{self, Fault, Level};

#[derive(Debug, Parser)]
#[command(name = "lrsd-lab", version, about = "Near-Clifford monitored-circuit ensembles and their analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (a file path for `plot`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configuration's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to LRSD_LAB_THREADS, then the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configuration's truncation cutoff.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Sweep axis `KEY=V1,V2,...` (repeatable; keys L, p_m, eta, beta, p_xz, epsilon).
    #[arg(long, global = true)]
    pub grid: Vec<GridAxis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    Decay,
    Scaling,
    Crossing,
    Inflection,
    Transition,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run one ensemble as configured.
    Simulate {
        /// Also write the final state of trajectory 0.
        #[arg(long)]
        checkpoint: bool,
    },
    /// Run the configuration over a parameter grid (resumable).
    Sweep,
    /// Run the purification model and fit the ancilla decay time.
    Purification,
    /// Run the Z-basis magic model and report the nullity.
    Magic {
        /// Write trajectory 0's Bell samples as hex rows.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Run the Clifford model and report cluster observables.
    Cluster {
        /// Also compute the max-min entropy.
        #[arg(long)]
        entropy: bool,
        /// Write trajectory 0's final graph as an edge list.
        #[arg(long)]
        edges: bool,
    },
    /// Fit result files and write fits.csv and fits.json.
    Fit {
        #[arg(long, value_enum)]
        kind: FitKind,
        #[arg(long, value_enum)]
        observable: Option<Observable>,
        #[arg(long, value_enum, default_value = "p_m")]
        x: Control,
        /// Divide the observable by L^rescale (crossing).
        #[arg(long, default_value_t = 0.0)]
        rescale: f64,
        inputs: Vec<PathBuf>,
    },
    /// Optimize a finite-size scaling collapse.
    Collapse {
        #[arg(long, value_enum, default_value = "tau")]
        observable: Observable,
        #[arg(long, value_enum, default_value = "p_m")]
        x: Control,
        /// Search range `LO,HI` for the critical point.
        #[arg(long, default_value = "0.1,0.5")]
        x_c: Range,
        /// Search range for the exponent of L multiplying (x - x_c).
        #[arg(long, default_value = "0.1,2.0")]
        x_exp: Range,
        /// Search range for the exponent of L dividing the observable.
        #[arg(long, default_value = "0.0,1.0")]
        y_exp: Range,
        #[arg(long, default_value_t = 9)]
        grid_points: usize,
        inputs: Vec<PathBuf>,
    },
    /// Check the engine against the oracle and its invariants.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
        /// Deliberately break the engine under test.
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Render result files as SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, value_enum)]
        observable: Option<Observable>,
        #[arg(long, value_enum, default_value = "p_m")]
        x: Control,
        #[arg(long, default_value_t = 0.0)]
        rescale: f64,
        /// Collapse ansatz `X_C,X_EXP,Y_EXP`; optimized over defaults when absent.
        #[arg(long)]
        ansatz: Option<String>,
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range(pub f64, pub f64);

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
        match v.as_slice() {
            [a] => Ok(Range(*a, *a)),
            [a, b] if a <= b => Ok(Range(*a, *b)),
            _ => Err(format!("`{s}` is not LO,HI with LO ≤ HI")),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| LabError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
}

fn simulate(cli: &Cli, adjust: impl FnOnce(&mut RunConfig)) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = load_config(cli)?;
    adjust(&mut cfg);
    cfg.validate()?;
    let threads = resolve_threads(cli.threads)?;
    let records = run_ensemble(&cfg, threads)?;
    let path = io::write_run(&out_dir(cli), "run", &cfg, &records)?;
    let s = io::read_summary(&io::summary_path(&path))?;
    println!(
        "{} trajectories ({} discarded) -> {}",
        records.len(),
        s.discarded.len(),
        path.display()
    );
    let m = &s.means;
    println!(
        "mean n_max {}  S_mm {}  nullity {}  residual T {}  purified {}",
        fmt_opt(m.n_max),
        fmt_opt(m.s_mm),
        fmt_opt(m.nullity),
        fmt_opt(m.residual_t),
        fmt_opt(m.purified_fraction)
    );
    Ok((cfg, path))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn s(v: f64) -> String {
    v.to_string()
}

fn fit_row(f: &FitResult) -> Vec<String> {
    vec![
        f.model.as_str().into(),
        f.gamma.map(s).unwrap_or_default(),
        s(f.a),
        s(f.b),
        s(f.chi2_dof),
    ]
}

fn scaling_rows(x: f64, fits: &ScalingFits) -> Vec<Vec<String>> {
    [&fits.power, &fits.area, &fits.log]
        .into_iter()
        .map(|f| {
            let mut r = vec![s(x), fits.class.as_str().into()];
            r.extend(fit_row(f));
            r
        })
        .collect()
}

const SCALING_HEADER: [&str; 7] = ["x", "class", "model", "gamma", "a", "b", "chi2_dof"];

fn fit(cli: &Cli, kind: FitKind, obs: Option<Observable>, x: Control, rescale: f64, inputs: &[PathBuf]) -> Result<()> {
    let runs = io::load_inputs(inputs)?;
    let out = out_dir(cli);
    std::fs::create_dir_all(&out)?;
    let (csv_path, json_path) = (out.join("fits.csv"), out.join("fits.json"));
    match kind {
        FitKind::Decay => {
            let mut rows = Vec::new();
            let mut fits = Vec::new();
            for r in &runs {
                let c = r.config();
                let key = vec![r.path.display().to_string(), c.l.to_string(), s(c.p_m), s(c.eta), s(c.beta)];
                match observe::decay_fit(r) {
                    Ok(f) => {
                        let (ti, tf) = f.window.expect("decay window");
                        println!("{}: tau {:.4} ± {:.4} (R² {:.5}, window {ti}..{tf})", r.path.display(), f.tau.unwrap(), f.tau_err.unwrap(), f.r2);
                        let mut row = key;
                        row.extend([s(f.tau.unwrap()), s(f.tau_err.unwrap()), s(f.r2), s(ti), s(tf), String::new()]);
                        rows.push(row);
                        fits.push((r.path.display().to_string(), Some(f), None));
                    }
                    Err(LabError::Analysis(e)) => {
                        println!("{}: {e}", r.path.display());
                        let mut row = key;
                        row.extend([String::new(), String::new(), String::new(), String::new(), String::new(), e.to_string()]);
                        rows.push(row);
                        fits.push((r.path.display().to_string(), None, Some(e.to_string())));
                    }
                    Err(e) => return Err(e),
                }
            }
            write_table(&csv_path, &["file", "L", "p_m", "eta", "beta", "tau", "tau_err", "r2", "t_i", "t_f", "error"], &rows)?;
            write_json(&json_path, &fits)?;
        }
        FitKind::Scaling => {
            let obs = obs.unwrap_or(Observable::Nullity);
            let mut rows = Vec::new();
            let mut all = Vec::new();
            for p in observe::scaling_points(&runs, obs, x)? {
                let l: Vec<f64> = p.data.iter().map(|d| d.0).collect();
                let y: Vec<f64> = p.data.iter().map(|d| d.1).collect();
                let e: Vec<f64> = p.data.iter().map(|d| d.2).collect();
                let fits = crate::analysis::fit_scaling(&l, &y, &e)?;
                println!(
                    "{}={}: {} (chi2/dof power {:.4} area {:.4} log {:.4})",
                    x.label(),
                    p.x,
                    fits.class.as_str(),
                    fits.power.chi2_dof,
                    fits.area.chi2_dof,
                    fits.log.chi2_dof
                );
                rows.extend(scaling_rows(p.x, &fits));
                all.push((p.x, fits));
            }
            write_table(&csv_path, &SCALING_HEADER, &rows)?;
            write_json(&json_path, &all)?;
        }
        FitKind::Crossing => {
            let obs = obs.unwrap_or(Observable::NMax);
            let c = crossing(&observe::curves(&runs, obs, x, rescale)?)?;
            println!("crossing {} = {:.5} ± {:.5} ({} intersections)", x.label(), c.p_c, c.sigma, c.points.len());
            write_table(&csv_path, &["p_c", "sigma", "intersections"], &[vec![s(c.p_c), s(c.sigma), c.points.len().to_string()]])?;
            write_json(&json_path, &c)?;
        }
        FitKind::Inflection => {
            let obs = obs.unwrap_or(Observable::Tau);
            let scale = if obs == Observable::Tau { InflectionScale::LogLog } else { InflectionScale::LinLog };
            let inf = inflection(&observe::scaling_points(&runs, obs, x)?, scale)?;
            println!("inflection {} = {:.5}, slope {:.5}", x.label(), inf.p_c, inf.slope);
            write_table(&csv_path, &["p_c", "slope"], &[vec![s(inf.p_c), s(inf.slope)]])?;
            write_json(&json_path, &inf)?;
        }
        FitKind::Transition => {
            let obs = obs.unwrap_or(Observable::Nullity);
            let pts = observe::scaling_points(&runs, obs, x)?;
            let (t, fits) = scaling_transition(&pts)?;
            println!(
                "transition {} = {:.5} ± {:.5} (σ_A {:.5}, σ_B {})",
                x.label(),
                t.x_c,
                t.sigma,
                t.sigma_a,
                fmt_opt(t.sigma_b)
            );
            let rows: Vec<Vec<String>> = pts.iter().zip(&fits).flat_map(|(p, f)| scaling_rows(p.x, f)).collect();
            write_table(&csv_path, &SCALING_HEADER, &rows)?;
            write_json(&json_path, &serde_json::json!({ "transition": t, "fits": fits }))?;
        }
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn parse_ansatz(s: &str) -> Result<Ansatz> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| LabError::Config(format!("ansatz `{s}`: {e}"))))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [x_c, x_exp, y_exp] => Ok(Ansatz { x_c: *x_c, x_exp: *x_exp, y_exp: *y_exp }),
        _ => Err(LabError::Config(format!("ansatz `{s}` needs X_C,X_EXP,Y_EXP"))),
    }
}

fn default_bounds() -> CollapseBounds {
    CollapseBounds { x_c: (0.1, 0.5), x_exp: (0.1, 2.0), y_exp: (0.0, 1.0) }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    if !cli.grid.is_empty() && !matches!(cli.cmd, Cmd::Sweep) {
        return Err(LabError::Config("--grid only applies to sweep".into()));
    }
    match &cli.cmd {
        Cmd::Simulate { checkpoint } => {
            let (cfg, path) = simulate(&cli, |_| {})?;
            if *checkpoint {
                let (_, tr) = run_trajectory_with_state(&cfg.circuit(), 0);
                let tr = tr.ok_or_else(|| LabError::Checkpoint("trajectory 0 was discarded".into()))?;
                let target = path.with_file_name("state-0.json");
                match &tr.engine {
                    Engine::Lrsd(s) => write_json(&target, &StateJson::from_state(s))?,
                    Engine::Stabilizer(t) => write_json(&target, &TableauJson::from_tableau(t))?,
                }
                println!("checkpoint -> {}", target.display());
            }
        }
        Cmd::Sweep => {
            if cli.grid.is_empty() {
                return Err(LabError::Config("sweep needs at least one --grid".into()));
            }
            let cfg = load_config(&cli)?;
            let threads = resolve_threads(cli.threads)?;
            let out = out_dir(&cli);
            let r = sweep(&cfg, &cli.grid, &out, threads, |i, fresh| {
                println!("point {i}: {}", if fresh { "computed" } else { "complete, skipped" });
            })?;
            println!("{} computed, {} reused -> {}", r.computed.len(), r.reused.len(), out.display());
        }
        Cmd::Purification => {
            let (_, path) = simulate(&cli, |c| c.model = ModelName::XBasisPurification)?;
            let run = io::load_run(&path)?;
            match observe::decay_fit(&run) {
                Ok(f) => println!("tau {:.4} ± {:.4} (R² {:.5})", f.tau.unwrap(), f.tau_err.unwrap(), f.r2),
                Err(e) => println!("no decay fit: {e}"),
            }
        }
        Cmd::Magic { dump_samples } => {
            let (cfg, path) = simulate(&cli, |c| c.model = ModelName::ZBasisMagic)?;
            if *dump_samples {
                let (_, tr) = run_trajectory_with_state(&cfg.circuit(), 0);
                let tr = tr.ok_or_else(|| LabError::Checkpoint("trajectory 0 was discarded".into()))?;
                let t = tr.clifford_tableau().expect("Z-basis runs keep a tableau");
                let form = build_bell_form(t, tr.ledger.counts())
                    .map_err(|e| LabError::Checkpoint(format!("Bell form: {e}")))?;
                let mut rng = trajectory_rng(cfg.seed ^ 0xbe11_5a3b_1e5d_0000, 0);
                let lines: Vec<String> =
                    (0..2 * cfg.l).map(|_| io::bell_dump_line(&bell_sample(&form, &mut rng))).collect();
                let target = path.with_file_name("bell-samples.txt");
                std::fs::write(&target, lines.join("\n") + "\n")?;
                println!("Bell samples -> {}", target.display());
            }
        }
        Cmd::Cluster { entropy, edges } => {
            let (cfg, path) = simulate(&cli, |c| {
                c.model = ModelName::CliffordCluster;
                c.final_entropy |= *entropy;
            })?;
            if *edges {
                let (_, tr) = run_trajectory_with_state(&cfg.circuit(), 0);
                let tr = tr.ok_or_else(|| LabError::Checkpoint("trajectory 0 was discarded".into()))?;
                let (g, _) = to_graph_state(tr.clifford_tableau().expect("Clifford runs keep a tableau"))
                    .map_err(|e| LabError::Checkpoint(e.to_string()))?;
                let target = path.with_file_name("graph-0.edges");
                std::fs::write(&target, g.to_edge_list())?;
                println!("edges -> {}", target.display());
            }
        }
        Cmd::Fit { kind, observable, x, rescale, inputs } => fit(&cli, *kind, *observable, *x, *rescale, inputs)?,
        Cmd::Collapse { observable, x, x_c, x_exp, y_exp, grid_points, inputs } => {
            let runs = io::load_inputs(inputs)?;
            let data = observe::collapse_points(&runs, *observable, *x)?;
            let bounds = CollapseBounds { x_c: (x_c.0, x_c.1), x_exp: (x_exp.0, x_exp.1), y_exp: (y_exp.0, y_exp.1) };
            let f = optimize_collapse(&data, bounds, *grid_points)?;
            println!(
                "x_c {:.5}  x_exp {:.5}  y_exp {:.5}  quality {:.3e}",
                f.ansatz.x_c, f.ansatz.x_exp, f.ansatz.y_exp, f.quality
            );
            let out = out_dir(&cli);
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("collapse.json"), &f)?;
        }
        Cmd::Verify { level, inject_fault } => {
            let results = verify::run(*level, *inject_fault, |r| println!("{r}"));
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} suites, {failed} failed", results.len());
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Cmd::Plot { kind, observable, x, rescale, ansatz, inputs } => {
            let runs = io::load_inputs(inputs)?;
            let spec = match kind {
                PlotKind::Decay => plot::decay_spec(&runs)?,
                PlotKind::Crossing => plot::crossing_spec(&runs, observable.unwrap_or(Observable::NMax), *x, *rescale)?,
                PlotKind::Scaling => plot::scaling_spec(&runs, observable.unwrap_or(Observable::Entries), *x)?,
                PlotKind::Collapse => {
                    let obs = observable.unwrap_or(Observable::Tau);
                    let a = match ansatz {
                        Some(s) => parse_ansatz(s)?,
                        None => optimize_collapse(&observe::collapse_points(&runs, obs, *x)?, default_bounds(), 9)?.ansatz,
                    };
                    plot::collapse_spec(&runs, obs, *x, a)?
                }
            };
            let svg = plot::render_svg(&spec)?;
            let target = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{kind:?}.svg").to_lowercase()));
            if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&target, svg)?;
            println!("plot -> {}", target.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
