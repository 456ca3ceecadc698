//! Result files: versioned record CSVs, JSON summaries, state checkpoints and
//! Bell-sample dumps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lrsd_core::circuits::TrajectoryRecord;
use lrsd_core::lrsd::{LrsdState, Term};
use lrsd_core::pauli::PauliString;
use lrsd_core::tableau::StabilizerTableau;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LabError, Result};

pub const RECORDS_VERSION: &str = "lrsd-lab records v1";
pub const COLUMNS: [&str; 5] = ["traj", "t", "S_Q", "n_terms", "entries"];
pub const SUMMARY_FORMAT: &str = "lrsd-lab-summary-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub traj: u64,
    pub t: usize,
    #[serde(rename = "S_Q")]
    pub s_q: Option<f64>,
    pub n_terms: usize,
    pub entries: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordsFile {
    pub config: RunConfig,
    pub hash: String,
    pub rows: Vec<Row>,
}

fn header_line(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(&cfg.resolved()).expect("config serializes");
    format!("# {RECORDS_VERSION} hash={} config={json}\n", cfg.hash())
}

pub fn rows_of(records: &[TrajectoryRecord]) -> Vec<Row> {
    records
        .iter()
        .flat_map(|r| {
            r.samples.iter().map(move |s| Row {
                traj: r.index,
                t: s.t,
                s_q: s.s_q,
                n_terms: s.n_terms,
                entries: s.entries,
            })
        })
        .collect()
}

pub fn records_csv(cfg: &RunConfig, rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        let s_q = r.s_q.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([r.traj.to_string(), r.t.to_string(), s_q, r.n_terms.to_string(), r.entries.to_string()])?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| LabError::Io(e.into_error()))?)
        .expect("csv output is utf-8");
    Ok(header_line(cfg) + &body)
}

pub fn parse_records(text: &str) -> Result<RecordsFile> {
    let bad = |m: &str| LabError::SchemaMismatch(m.to_string());
    let (first, rest) = text.split_once('\n').ok_or_else(|| bad("missing header comment"))?;
    let meta = first
        .strip_prefix("# ")
        .and_then(|s| s.strip_prefix(RECORDS_VERSION))
        .ok_or_else(|| bad("unknown records version"))?;
    let (hash, json) = meta
        .trim_start()
        .strip_prefix("hash=")
        .and_then(|s| s.split_once(" config="))
        .ok_or_else(|| bad("malformed header comment"))?;
    let config: RunConfig = serde_json::from_str(json).map_err(|e| bad(&format!("header config: {e}")))?;
    if config.hash() != hash {
        return Err(bad("config hash does not match header config"));
    }
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(bad(&format!("columns {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != COLUMNS.len() {
            return Err(bad("short row"));
        }
        let num = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(&format!("bad {} `{}`", COLUMNS[i], &rec[i])));
        let s_q = match &rec[2] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|_| bad(&format!("bad S_Q `{v}`")))?),
        };
        rows.push(Row { traj: num(0)?, t: num(1)? as usize, s_q, n_terms: num(3)? as usize, entries: num(4)? });
    }
    Ok(RecordsFile { config, hash: hash.to_string(), rows })
}

pub fn read_records(path: &Path) -> Result<RecordsFile> {
    let text = std::fs::read_to_string(path)?;
    parse_records(&text).map_err(|e| match e {
        LabError::SchemaMismatch(m) => LabError::SchemaMismatch(format!("{}: {m}", path.display())),
        LabError::Csv(c) => LabError::SchemaMismatch(format!("{}: {c}", path.display())),
        e => e,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub traj: u64,
    pub seed: String,
    pub n_max: Option<usize>,
    pub s_mm: Option<f64>,
    pub nullity: Option<usize>,
    pub residual_t: Option<usize>,
    pub bell_steps: Option<usize>,
    pub purified_at: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub traj: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Means {
    pub n_max: Option<f64>,
    pub s_mm: Option<f64>,
    pub nullity: Option<f64>,
    pub residual_t: Option<f64>,
    pub purified_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// Data rows in the sibling CSV; a mismatch marks the pair incomplete.
    pub rows: usize,
    pub discarded: Vec<Discarded>,
    pub means: Means,
    pub trajectories: Vec<TrajectorySummary>,
}

fn mean_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(cfg: &RunConfig, records: &[TrajectoryRecord], rows: usize) -> Summary {
    let kept: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.discarded.is_none()).collect();
    let purified_fraction = (cfg.model == crate::config::ModelName::XBasisPurification)
        .then(|| mean_of(kept.iter().map(|r| r.final_obs.purified_at.is_some() as u8 as f64)))
        .flatten();
    Summary {
        format: SUMMARY_FORMAT.into(),
        config: cfg.resolved(),
        config_hash: cfg.hash(),
        rows,
        discarded: records
            .iter()
            .filter_map(|r| r.discarded.as_ref().map(|m| Discarded { traj: r.index, reason: m.clone() }))
            .collect(),
        means: Means {
            n_max: mean_of(kept.iter().filter_map(|r| r.final_obs.n_max.map(|v| v as f64))),
            s_mm: mean_of(kept.iter().filter_map(|r| r.final_obs.s_mm)),
            nullity: mean_of(kept.iter().filter_map(|r| r.final_obs.nullity.map(|v| v as f64))),
            residual_t: mean_of(kept.iter().filter_map(|r| r.final_obs.residual_t.map(|v| v as f64))),
            purified_fraction,
        },
        trajectories: records
            .iter()
            .map(|r| {
                let o = &r.final_obs;
                TrajectorySummary {
                    traj: r.index,
                    seed: hex::encode(r.seed),
                    n_max: o.n_max,
                    s_mm: o.s_mm,
                    nullity: o.nullity,
                    residual_t: o.residual_t,
                    bell_steps: o.bell_steps,
                    purified_at: o.purified_at,
                    note: o.note.clone(),
                }
            })
            .collect(),
    }
}

pub fn summary_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.summary.json"))
}

/// Writes `<dir>/<stem>.csv` and then its summary, returning the CSV path.
pub fn write_run(dir: &Path, stem: &str, cfg: &RunConfig, records: &[TrajectoryRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let rows = rows_of(records);
    let csv_path = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, records_csv(cfg, &rows)?)?;
    let summary = summarize(cfg, records, rows.len());
    std::fs::write(summary_path(&csv_path), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(csv_path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub path: PathBuf,
    pub records: RecordsFile,
    pub summary: Option<Summary>,
}

impl RunData {
    pub fn config(&self) -> &RunConfig {
        &self.records.config
    }
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let s: Summary = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if s.format != SUMMARY_FORMAT {
        return Err(LabError::SchemaMismatch(format!("{}: format `{}`", path.display(), s.format)));
    }
    Ok(s)
}

/// Loads a record CSV and, when present and consistent, its summary.
pub fn load_run(path: &Path) -> Result<RunData> {
    let records = read_records(path)?;
    let sp = summary_path(path);
    let summary = if sp.exists() {
        let s = read_summary(&sp)?;
        if s.config_hash != records.hash || s.rows != records.rows.len() {
            return Err(LabError::SchemaMismatch(format!("{} does not match {}", sp.display(), path.display())));
        }
        Some(s)
    } else {
        None
    };
    Ok(RunData { path: path.to_path_buf(), records, summary })
}

/// Expands directories to their `*.csv` files (sorted) and loads every file.
pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<RunData>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(LabError::SchemaMismatch("no record files in the input".into()));
    }
    files.iter().map(|f| load_run(f)).collect()
}

// ---- checkpoints ----

pub const TABLEAU_FORMAT: &str = "lrsd-tableau-v1";
pub const STATE_FORMAT: &str = "lrsd-state-v1";

/// `x bits|z bits|phase`, one character per qubit, phase as the power of `i`.
pub fn pauli_row(p: &PauliString) -> String {
    let n = p.n_qubits();
    let mut s = String::with_capacity(2 * n + 4);
    s.extend((0..n).map(|j| if p.x_bit(j) { '1' } else { '0' }));
    s.push('|');
    s.extend((0..n).map(|j| if p.z_bit(j) { '1' } else { '0' }));
    let _ = write!(s, "|{}", p.phase());
    s
}

pub fn parse_pauli_row(row: &str, n: usize) -> Result<PauliString> {
    let bad = || LabError::Checkpoint(format!("bad row `{row}`"));
    let mut parts = row.split('|');
    let (x, z, ph) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(x), Some(z), Some(ph), None) => (x, z, ph),
        _ => return Err(bad()),
    };
    let bits = |s: &str| -> Result<Vec<bool>> {
        if s.len() != n {
            return Err(bad());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad()),
            })
            .collect()
    };
    let phase: u8 = ph.parse().map_err(|_| bad())?;
    if phase > 3 {
        return Err(bad());
    }
    Ok(PauliString::from_bits(&bits(x)?, &bits(z)?, phase))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauJson {
    pub format: String,
    pub n: usize,
    pub stabilizers: Vec<String>,
    pub destabilizers: Vec<String>,
    pub logical_x: Vec<String>,
    pub logical_z: Vec<String>,
}

impl TableauJson {
    pub fn from_tableau(t: &StabilizerTableau) -> Self {
        let rows = |v: &[PauliString]| v.iter().map(pauli_row).collect();
        Self {
            format: TABLEAU_FORMAT.into(),
            n: t.n_qubits(),
            stabilizers: rows(t.stabilizers()),
            destabilizers: rows(t.destabilizers()),
            logical_x: rows(t.logical_x()),
            logical_z: rows(t.logical_z()),
        }
    }

    pub fn to_tableau(&self) -> Result<StabilizerTableau> {
        if self.format != TABLEAU_FORMAT {
            return Err(LabError::Checkpoint(format!("format `{}`", self.format)));
        }
        let rows = |v: &[String]| v.iter().map(|r| parse_pauli_row(r, self.n)).collect::<Result<Vec<_>>>();
        StabilizerTableau::from_parts(
            self.n,
            rows(&self.stabilizers)?,
            rows(&self.destabilizers)?,
            rows(&self.logical_x)?,
            rows(&self.logical_z)?,
        )
        .map_err(|e| LabError::Checkpoint(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub re: f64,
    pub im: f64,
    pub sigma: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub format: String,
    pub tableau: TableauJson,
    pub cutoff: f64,
    pub terms: Vec<TermJson>,
}

impl StateJson {
    pub fn from_state(s: &LrsdState) -> Self {
        Self {
            format: STATE_FORMAT.into(),
            tableau: TableauJson::from_tableau(s.tableau()),
            cutoff: s.cutoff(),
            terms: s
                .terms()
                .iter()
                .map(|t| TermJson { re: t.coeff.re, im: t.coeff.im, sigma: pauli_row(&t.sigma) })
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<LrsdState> {
        if self.format != STATE_FORMAT {
            return Err(LabError::Checkpoint(format!("format `{}`", self.format)));
        }
        let n = self.tableau.n;
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(Term { coeff: Complex64::new(t.re, t.im), sigma: parse_pauli_row(&t.sigma, n)? }))
            .collect::<Result<Vec<_>>>()?;
        LrsdState::from_parts(self.tableau.to_tableau()?, terms, self.cutoff)
            .map_err(|e| LabError::Checkpoint(e.to_string()))
    }
}

/// One Bell sample as `x:z`, each a hex string of the bits packed
/// little-endian within bytes (qubit `j` is bit `j % 8` of byte `j / 8`).
pub fn bell_dump_line(p: &PauliString) -> String {
    let n = p.n_qubits();
    let pack = |f: &dyn Fn(usize) -> bool| {
        let mut bytes = vec![0u8; n.div_ceil(8)];
        for j in (0..n).filter(|&j| f(j)) {
            bytes[j / 8] |= 1 << (j % 8);
        }
        hex::encode(bytes)
    };
    format!("{}:{}", pack(&|j| p.x_bit(j)), pack(&|j| p.z_bit(j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelName;
    use crate::runner::run_ensemble;
    use rand::SeedableRng;

    #[test]
    fn records_round_trip() {
        let mut cfg = RunConfig::new(ModelName::XBasisPurification, 6);
        cfg.n_traj = 3;
        cfg.eta = 1.0;
        let recs = run_ensemble(&cfg, 1).unwrap();
        let rows = rows_of(&recs);
        let text = records_csv(&cfg, &rows).unwrap();
        assert!(text.starts_with("# lrsd-lab records v1 hash="));
        let back = parse_records(&text).unwrap();
        assert_eq!(back.rows, rows);
        assert_eq!(back.config, cfg.resolved());
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_records(""), Err(LabError::SchemaMismatch(_))));
        let cfg = RunConfig::new(ModelName::CliffordCluster, 4);
        let text = records_csv(&cfg, &[]).unwrap();
        assert!(parse_records(&text).unwrap().rows.is_empty());
        let wrong = text.replace("S_Q", "SQ");
        assert!(matches!(parse_records(&wrong), Err(LabError::SchemaMismatch(_))));
        let tampered = text.replace("\"L\":4", "\"L\":5");
        assert!(matches!(parse_records(&tampered), Err(LabError::SchemaMismatch(_))));
        let bad_row = format!("{text}0,1,x,1,1\n");
        assert!(matches!(parse_records(&bad_row), Err(LabError::SchemaMismatch(_))));
    }

    #[test]
    fn state_checkpoint_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = LrsdState::plus_state(4);
        for q in 0..4 {
            s.apply_t_gate(q).unwrap();
            s.apply_clifford(&lrsd_core::tableau::CliffordGate::CZ(q, (q + 1) % 4)).unwrap();
        }
        let z: PauliString = "ZZII".parse().unwrap();
        s.measure(&z, None, &mut rng).unwrap();
        let json = serde_json::to_string(&StateJson::from_state(&s)).unwrap();
        let back: StateJson = serde_json::from_str(&json).unwrap();
        let r = back.to_state().unwrap();
        assert_eq!(r.n_terms(), s.n_terms());
        let d = (r.to_density_matrix() - s.to_density_matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(d < 1e-15);
    }

    #[test]
    fn rows_and_dumps() {
        let p: PauliString = "-iXYZI".parse().unwrap();
        assert_eq!(pauli_row(&p), "1100|0110|3");
        assert_eq!(parse_pauli_row("1100|0110|3", 4).unwrap(), p);
        assert!(parse_pauli_row("110|0110|3", 4).is_err());
        let q: PauliString = "IIIIIIIIX".parse().unwrap();
        assert_eq!(bell_dump_line(&q), "0001:0000");
    }
}
