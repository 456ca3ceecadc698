//! Single-pair all-to-all monitored circuits and the trajectory driver.
//!
//! Each step has three stages drawn in a fixed order from the trajectory's
//! stream: a CZ on a random pair with probability 1/2, the `T` stage, and a
//! measurement of a random qubit with probability `p_m` (X basis with
//! probability `p_xz`, else Z followed by a reset to `|+⟩`).
//!
//! The `T` stage has two modes. [`TStage::PerStep`] places one `T` on a random
//! qubit with probability `p_T = η / L^β`; [`TStage::PerQubit`] gives every
//! qubit its own `T` with probability `p_T`, so `η` is the mean number of `T`
//! gates per step at `β = 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::entropy;
use crate::graphstate;
use crate::lrsd::{LrsdError, LrsdState};
use crate::magic::{self, ConvergencePolicy, MagicError};
use crate::pauli::{Letter, PauliString};
use crate::tableau::{sample_two_qubit_clifford, CliffordGate, StabilizerTableau, TableauError};

/// Probability of the CZ stage. Fixed by the model.
pub const P_CZ: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("operation not available for this model")]
    WrongModel,
    #[error(transparent)]
    Lrsd(#[from] LrsdError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Magic(#[from] MagicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Z measurements only; `T` gates are also tracked in a ledger so the
    /// final state is a Clifford state followed by one `T` layer.
    ZBasisMagic,
    /// `L` system qubits plus one ancilla entangled with them.
    XBasisPurification,
    /// Cluster statistics of the Clifford dynamics.
    CliffordCluster,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::ZBasisMagic => "z-basis-magic",
            Model::XBasisPurification => "x-basis-purification",
            Model::CliffordCluster => "clifford-cluster",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "z-basis-magic" => Some(Model::ZBasisMagic),
            "x-basis-purification" => Some(Model::XBasisPurification),
            "clifford-cluster" => Some(Model::CliffordCluster),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TStage {
    PerStep,
    PerQubit,
}

impl TStage {
    pub fn as_str(self) -> &'static str {
        match self {
            TStage::PerStep => "per-step",
            TStage::PerQubit => "per-qubit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-step" => Some(TStage::PerStep),
            "per-qubit" => Some(TStage::PerQubit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitConfig {
    /// Number of system qubits `L`.
    pub n: usize,
    pub eta: f64,
    pub beta: f64,
    pub p_m: f64,
    /// Probability that a measurement is in the X basis.
    pub p_xz: f64,
    /// Defaults to `2L²`.
    pub t_final: Option<usize>,
    pub epsilon: f64,
    pub model: Model,
    pub t_stage: TStage,
    /// Z-basis model only: evolve the full LRSD alongside the ledger. Without
    /// it the state is the Clifford tableau plus the ledger, which gives the
    /// same Z outcome statistics since every `T` is diagonal.
    pub full_state: bool,
    pub seed: u64,
    pub n_traj: usize,
    /// Steps between recorded samples; defaults to `L`.
    pub record_every: Option<usize>,
    pub record_events: bool,
    /// Compute the max-min entropy at the end (exhaustive for small clusters).
    pub final_entropy: bool,
}

impl CircuitConfig {
    pub fn new(model: Model, n: usize) -> Self {
        let p_xz = match model {
            Model::ZBasisMagic => 0.0,
            _ => 1.0,
        };
        Self {
            n,
            eta: 0.0,
            beta: 1.0,
            p_m: 0.5,
            p_xz,
            t_final: None,
            epsilon: 0.0,
            model,
            t_stage: TStage::PerStep,
            full_state: false,
            seed: 0,
            n_traj: 1,
            record_every: None,
            record_events: false,
            final_entropy: false,
        }
    }

    /// `p_T = η / L^β`, clamped to `[0, 1]`.
    pub fn p_t(&self) -> f64 {
        (self.eta / libm::pow(self.n as f64, self.beta)).clamp(0.0, 1.0)
    }

    pub fn t_final_steps(&self) -> usize {
        self.t_final.unwrap_or(2 * self.n * self.n)
    }

    pub fn record_interval(&self) -> usize {
        self.record_every.unwrap_or(self.n).max(1)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let bad = |m: String| Err(CircuitError::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("L = {} < 2", self.n));
        }
        for (name, p) in [("p_m", self.p_m), ("p_xz", self.p_xz)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !(self.eta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("bad T-rate parameters eta = {}, beta = {}", self.eta, self.beta));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon = {} < 0", self.epsilon));
        }
        if self.model == Model::ZBasisMagic && self.p_xz != 0.0 {
            return bad(String::from("the Z-basis model needs p_xz = 0"));
        }
        Ok(())
    }
}

/// A circuit event. Measurements carry their outcome so logs can be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Clifford(CliffordGate),
    T(usize),
    Measure { pauli: PauliString, outcome: i8 },
}

/// Per-qubit `T` counts that commute to the end of a Z-basis circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TLedger {
    counts: Vec<u32>,
}

impl TLedger {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `k = Σ (N_i mod 2)`.
    pub fn residual(&self) -> usize {
        self.counts.iter().filter(|&&c| c % 2 == 1).count()
    }

    /// `T(i)` increments `N_i`; a Z measurement of qubit `i` clears it.
    pub fn absorb(&mut self, event: &Event) {
        match event {
            Event::T(q) => self.counts[*q] += 1,
            Event::Measure { pauli, .. } => {
                if let Some(q) = single_z_site(pauli) {
                    self.counts[q] = 0;
                }
            }
            Event::Clifford(_) => {}
        }
    }
}

fn single_z_site(p: &PauliString) -> Option<usize> {
    let mut sites = p.support();
    let q = sites.next()?;
    (sites.next().is_none() && p.letter(q) == Letter::Z).then_some(q)
}

/// Ledger update that is only meaningful for the Z-basis model.
pub fn absorb_t_gates(ledger: &mut TLedger, event: &Event, model: Model) -> Result<(), CircuitError> {
    if model != Model::ZBasisMagic {
        return Err(CircuitError::WrongModel);
    }
    ledger.absorb(event);
    Ok(())
}

/// The simulated state: a tableau when no `T` can occur, else an LRSD.
#[derive(Debug, Clone)]
pub enum Engine {
    Stabilizer(StabilizerTableau),
    Lrsd(LrsdState),
}

impl Engine {
    fn apply_clifford(&mut self, g: &CliffordGate) -> Result<(), CircuitError> {
        match self {
            Engine::Stabilizer(t) => t.apply_clifford(g)?,
            Engine::Lrsd(s) => s.apply_clifford(g)?,
        }
        Ok(())
    }

    fn measure<R: Rng + ?Sized>(&mut self, p: &PauliString, rng: &mut R) -> Result<i8, CircuitError> {
        Ok(match self {
            Engine::Stabilizer(t) => t.measure_pauli(p, None, rng)?.outcome,
            Engine::Lrsd(s) => s.measure(p, None, rng)?.0,
        })
    }

    pub fn n_terms(&self) -> usize {
        match self {
            Engine::Stabilizer(_) => 1,
            Engine::Lrsd(s) => s.n_terms(),
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub s_q: Option<f64>,
    pub n_terms: usize,
    pub entries: u64,
}

/// Observables computed once at the end of a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FinalObservables {
    pub n_max: Option<usize>,
    pub s_mm: Option<f64>,
    pub nullity: Option<usize>,
    pub residual_t: Option<usize>,
    pub bell_steps: Option<usize>,
    pub purified_at: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub seed: [u8; 32],
    pub samples: Vec<Sample>,
    pub final_obs: FinalObservables,
    pub discarded: Option<String>,
    pub events: Option<Vec<Event>>,
}

/// State of a running trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    cfg: CircuitConfig,
    pub engine: Engine,
    /// Clifford-only companion for the Z-basis model.
    pub shadow: Option<StabilizerTableau>,
    pub ledger: TLedger,
    pub ancilla: Option<usize>,
    pub events: Option<Vec<Event>>,
    n_sys: usize,
}

impl Trajectory {
    /// Starts from `|+⟩^{⊗L}`; the purification model is prepared with
    /// [`prepare_purification`] instead.
    pub fn new(cfg: &CircuitConfig) -> Result<Self, CircuitError> {
        cfg.validate()?;
        let n = cfg.n;
        let engine = if cfg.model == Model::ZBasisMagic && !cfg.full_state {
            Engine::Stabilizer(StabilizerTableau::plus_state(n))
        } else {
            make_engine(cfg, StabilizerTableau::plus_state(n))
        };
        let shadow = (cfg.model == Model::ZBasisMagic && matches!(engine, Engine::Lrsd(_)))
            .then(|| StabilizerTableau::plus_state(n));
        Ok(Self {
            cfg: cfg.clone(),
            engine,
            shadow,
            ledger: TLedger::new(n),
            ancilla: None,
            events: cfg.record_events.then(Vec::new),
            n_sys: n,
        })
    }

    pub fn config(&self) -> &CircuitConfig {
        &self.cfg
    }

    fn log(&mut self, e: Event) {
        if self.cfg.model == Model::ZBasisMagic {
            self.ledger.absorb(&e);
        }
        if let Some(ev) = &mut self.events {
            ev.push(e);
        }
    }

    fn clifford(&mut self, g: CliffordGate) -> Result<(), CircuitError> {
        self.engine.apply_clifford(&g)?;
        if let Some(sh) = &mut self.shadow {
            sh.apply_clifford(&g)?;
        }
        self.log(Event::Clifford(g));
        Ok(())
    }

    /// The stabilizer tableau of the Clifford part, if there is one.
    pub fn clifford_tableau(&self) -> Option<&StabilizerTableau> {
        match (&self.engine, &self.shadow) {
            (Engine::Stabilizer(t), _) => Some(t),
            (_, Some(t)) => Some(t),
            _ => None,
        }
    }

    /// One time step.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), CircuitError> {
        let n = self.n_sys;
        if rng.gen::<f64>() < P_CZ {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            self.clifford(CliffordGate::CZ(a, b))?;
        }
        let p_t = self.cfg.p_t();
        match self.cfg.t_stage {
            TStage::PerStep => {
                if rng.gen::<f64>() < p_t {
                    let q = rng.gen_range(0..n);
                    self.t_gate(q)?;
                }
            }
            TStage::PerQubit => {
                for q in 0..n {
                    if rng.gen::<f64>() < p_t {
                        self.t_gate(q)?;
                    }
                }
            }
        }
        if rng.gen::<f64>() < self.cfg.p_m {
            let q = rng.gen_range(0..n);
            let x_basis = rng.gen::<f64>() < self.cfg.p_xz;
            let letter = if x_basis { Letter::X } else { Letter::Z };
            let p = PauliString::single(self.engine_qubits(), q, letter);
            let outcome = self.engine.measure(&p, rng)?;
            if let Some(sh) = &mut self.shadow {
                sh.measure_pauli(&p, Some(outcome), rng)?;
            }
            self.log(Event::Measure { pauli: p, outcome });
            if !x_basis {
                if outcome < 0 {
                    self.clifford(CliffordGate::X(q))?;
                }
                self.clifford(CliffordGate::H(q))?;
            }
        }
        if self.cfg.epsilon > 0.0 {
            if let Engine::Lrsd(s) = &mut self.engine {
                s.truncate(self.cfg.epsilon)?;
            }
        }
        Ok(())
    }

    fn t_gate(&mut self, q: usize) -> Result<(), CircuitError> {
        if let Engine::Lrsd(s) = &mut self.engine {
            s.apply_t_gate(q)?;
        }
        self.log(Event::T(q));
        Ok(())
    }

    fn engine_qubits(&self) -> usize {
        self.n_sys + self.ancilla.is_some() as usize
    }

    pub fn n_terms(&self) -> usize {
        self.engine.n_terms()
    }

    pub fn entry_count(&self) -> u64 {
        crate::lrsd::entry_count(self.engine_qubits(), self.n_terms())
    }

    /// Entropy of the ancilla in bits (purification model only).
    pub fn ancilla_entropy(&self) -> Option<f64> {
        let a = self.ancilla?;
        Some(match &self.engine {
            Engine::Stabilizer(t) => entropy::stabilizer_entropy(t, &[a]) as f64,
            Engine::Lrsd(s) => entropy::ancilla_entropy(s, a),
        })
    }
}

fn make_engine(cfg: &CircuitConfig, t: StabilizerTableau) -> Engine {
    if cfg.p_t() > 0.0 {
        let mut s = LrsdState::from_tableau(t);
        s.set_cutoff(cfg.epsilon);
        Engine::Lrsd(s)
    } else {
        Engine::Stabilizer(t)
    }
}

/// `|+⟩^{⊗(L+1)}`, a CZ between the ancilla (index `L`) and a random system
/// qubit followed by `H` on the ancilla, then `⌈√10·L⌉` random two-qubit
/// Cliffords on random system pairs.
pub fn prepare_purification<R: Rng + ?Sized>(cfg: &CircuitConfig, rng: &mut R) -> Result<Trajectory, CircuitError> {
    if cfg.model != Model::XBasisPurification {
        return Err(CircuitError::WrongModel);
    }
    cfg.validate()?;
    let n = cfg.n;
    let anc = n;
    let engine = make_engine(cfg, StabilizerTableau::plus_state(n + 1));
    let mut tr = Trajectory {
        cfg: cfg.clone(),
        engine,
        shadow: None,
        ledger: TLedger::new(n),
        ancilla: Some(anc),
        events: cfg.record_events.then(Vec::new),
        n_sys: n,
    };
    let q = rng.gen_range(0..n);
    tr.clifford(CliffordGate::CZ(anc, q))?;
    tr.clifford(CliffordGate::H(anc))?;
    let count = libm::ceil(libm::sqrt(10.0) * n as f64) as usize;
    for _ in 0..count {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        tr.clifford(sample_two_qubit_clifford(rng, a, b))?;
    }
    Ok(tr)
}

/// ChaCha8 seed for trajectory `index`: SHA-256 of a domain tag, the master
/// seed and the index (little endian).
pub fn trajectory_seed(master: u64, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"lrsd-trajectory-v1");
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&out);
    seed
}

pub fn trajectory_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(trajectory_seed(master, index))
}

/// Runs one trajectory end to end. Deterministic in `(cfg, index)`.
pub fn run_trajectory(cfg: &CircuitConfig, index: u64) -> TrajectoryRecord {
    run_trajectory_with_state(cfg, index).0
}

/// Like [`run_trajectory`], also returning the final state unless the
/// trajectory was discarded.
pub fn run_trajectory_with_state(cfg: &CircuitConfig, index: u64) -> (TrajectoryRecord, Option<Trajectory>) {
    let seed = trajectory_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut record = TrajectoryRecord {
        index,
        seed,
        samples: Vec::new(),
        final_obs: FinalObservables::default(),
        discarded: None,
        events: None,
    };
    match drive(cfg, &mut rng, &mut record) {
        Ok(tr) => {
            record.events = tr.events.clone();
            finish(cfg, &tr, &mut rng, &mut record);
            (record, Some(tr))
        }
        Err(e) => {
            record.discarded = Some(format!("{e}"));
            (record, None)
        }
    }
}

fn sample_point(tr: &Trajectory, t: usize) -> Sample {
    Sample { t, s_q: tr.ancilla_entropy(), n_terms: tr.n_terms(), entries: tr.entry_count() }
}

fn drive(cfg: &CircuitConfig, rng: &mut ChaCha8Rng, record: &mut TrajectoryRecord) -> Result<Trajectory, CircuitError> {
    let mut tr = match cfg.model {
        Model::XBasisPurification => prepare_purification(cfg, rng)?,
        _ => Trajectory::new(cfg)?,
    };
    let t_final = cfg.t_final_steps();
    let every = cfg.record_interval();
    record.samples.push(sample_point(&tr, 0));
    for t in 1..=t_final {
        tr.step(rng)?;
        if t % every == 0 || t == t_final {
            let s = sample_point(&tr, t);
            let purified = s.s_q.is_some_and(|v| v.abs() < 1e-12);
            record.samples.push(s);
            if purified {
                // A disentangled ancilla stays disentangled: fill the rest.
                record.final_obs.purified_at = Some(t);
                let last = record.samples.last().cloned().expect("just pushed");
                let mut tt = t;
                while tt < t_final {
                    tt = (tt + every).min(t_final);
                    record.samples.push(Sample { t: tt, s_q: Some(0.0), ..last.clone() });
                }
                break;
            }
        }
    }
    Ok(tr)
}

fn finish(cfg: &CircuitConfig, tr: &Trajectory, rng: &mut ChaCha8Rng, record: &mut TrajectoryRecord) {
    let obs = &mut record.final_obs;
    if let Some(t) = tr.clifford_tableau() {
        match graphstate::to_graph_state(t) {
            Ok((g, _)) => {
                let parts = graphstate::clusters(&g);
                obs.n_max = Some(graphstate::n_max(&parts));
                if cfg.final_entropy {
                    obs.s_mm = Some(entropy::max_min_entropy(t, &parts, 2.0));
                }
            }
            Err(e) => obs.note = Some(format!("{e}")),
        }
        if cfg.model == Model::ZBasisMagic {
            obs.residual_t = Some(tr.ledger.residual());
            match magic::build_bell_form(t, tr.ledger.counts()) {
                Ok(f) => {
                    let (m, tau, _) = magic::sample_until_converged(&f, rng, ConvergencePolicy::for_size(cfg.n));
                    obs.nullity = Some(m);
                    obs.bell_steps = Some(tau);
                }
                Err(e) => obs.note = Some(format!("{e}")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_rules() {
        let mut l = TLedger::new(2);
        let z0 = Event::Measure { pauli: "ZI".parse().unwrap(), outcome: 1 };
        l.absorb(&Event::T(0));
        l.absorb(&Event::T(0));
        l.absorb(&z0);
        assert_eq!(l.counts()[0], 0);
        l.absorb(&z0);
        l.absorb(&Event::T(0));
        assert_eq!(l.counts()[0], 1);
        l.absorb(&Event::T(1));
        l.absorb(&Event::T(1));
        assert_eq!(l.residual(), 1);
        assert_eq!(absorb_t_gates(&mut l, &Event::T(1), Model::CliffordCluster), Err(CircuitError::WrongModel));
    }

    #[test]
    fn purification_starts_entangled() {
        let cfg = CircuitConfig::new(Model::XBasisPurification, 6);
        let mut rng = trajectory_rng(1, 0);
        let tr = prepare_purification(&cfg, &mut rng).unwrap();
        assert_eq!(tr.ancilla_entropy(), Some(1.0));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = CircuitConfig::new(Model::ZBasisMagic, 5);
        cfg.eta = 1.0;
        cfg.record_events = true;
        let a = run_trajectory(&cfg, 3);
        let b = run_trajectory(&cfg, 3);
        assert_eq!(a, b);
        assert!(a.discarded.is_none());
    }
}
