//! Self-check suites run by `lrsd-lab verify`: the engine against the dense
//! oracle, the ledger nullity against exhaustive enumeration, per-event
//! invariants and thread-count determinism.

use std::time::Instant;

use lrsd_core::circuits::{run_trajectory_with_state, CircuitConfig, Event, Model};
use lrsd_core::lrsd::LrsdState;
use lrsd_core::magic::{build_bell_form, sample_until_converged, ConvergencePolicy};
use lrsd_core::oracle::{compare, evolve, exact_nullity, StateVector, Tolerances};
use lrsd_core::pauli::{Letter, PauliString};
use lrsd_core::tableau::{sample_two_qubit_clifford, CliffordGate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelName, RunConfig};
use crate::runner::run_ensemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

/// Deliberate engine faults for checking that the suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// The engine under test conjugates `X_a ↦ -X_a Z_b` under `CZ(a, b)`.
    CzSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({:.1}s): {}", self.name, self.seconds, self.detail)
    }
}

pub fn random_pauli<R: Rng>(n: usize, rng: &mut R) -> PauliString {
    loop {
        let letters: Vec<Letter> =
            (0..n).map(|_| [Letter::I, Letter::X, Letter::Y, Letter::Z][rng.gen_range(0..4)]).collect();
        let mut p = PauliString::from_letters(&letters);
        if !p.is_identity_bits() {
            if rng.gen::<bool>() {
                p.set_phase(2);
            }
            return p;
        }
    }
}

fn random_gate<R: Rng>(n: usize, rng: &mut R) -> CliffordGate {
    let q = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= q {
        b += 1;
    }
    match rng.gen_range(0..10) {
        0..=4 => CliffordGate::CZ(q, b),
        5 => CliffordGate::H(q),
        6 => CliffordGate::S(q),
        7 => CliffordGate::CX(q, b),
        8 => [CliffordGate::X(q), CliffordGate::Y(q), CliffordGate::Z(q)][rng.gen_range(0..3)],
        _ => sample_two_qubit_clifford(rng, q, b),
    }
}

fn apply(s: &mut LrsdState, g: &CliffordGate, fault: Option<Fault>) -> Result<(), String> {
    s.apply_clifford(g).map_err(|e| e.to_string())?;
    if let (Some(Fault::CzSign), CliffordGate::CZ(a, _)) = (fault, g) {
        s.apply_clifford(&CliffordGate::Z(*a)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// A seeded circuit of `depth` events (Cliffords, `T` with rate `p_t`,
/// measurements with rate `p_meas`) run through the engine. Returns the
/// final state, the event log with sampled outcomes and their probabilities.
pub fn random_run<R: Rng>(
    n: usize,
    depth: usize,
    p_t: f64,
    p_meas: f64,
    rng: &mut R,
    fault: Option<Fault>,
    mut check: impl FnMut(&LrsdState, &LrsdState, &Event) -> Result<(), String>,
) -> Result<(LrsdState, Vec<Event>, Vec<f64>), String> {
    let mut s = LrsdState::plus_state(n);
    let mut events = Vec::with_capacity(depth);
    let mut probs = Vec::new();
    for _ in 0..depth {
        let before = s.clone();
        let u: f64 = rng.gen();
        let ev = if u < p_t {
            let q = rng.gen_range(0..n);
            s.apply_t_gate(q).map_err(|e| e.to_string())?;
            Event::T(q)
        } else if u < p_t + p_meas {
            let p = if rng.gen::<bool>() {
                PauliString::single(n, rng.gen_range(0..n), if rng.gen() { Letter::X } else { Letter::Z })
            } else {
                random_pauli(n, rng)
            };
            let (outcome, prob) = s.measure(&p, None, rng).map_err(|e| e.to_string())?;
            probs.push(prob);
            Event::Measure { pauli: p, outcome }
        } else {
            let g = random_gate(n, rng);
            apply(&mut s, &g, fault)?;
            Event::Clifford(g)
        };
        check(&before, &s, &ev)?;
        events.push(ev);
    }
    Ok((s, events, probs))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleStats {
    pub circuits: usize,
    pub max_rho_diff: f64,
    pub max_born_diff: f64,
    pub max_entropy_diff: f64,
}

/// `count` random circuits of depth `4L²` at size `n`, each compared with the
/// statevector replay of its event log.
pub fn oracle_suite(n: usize, count: usize, seed: u64, fault: Option<Fault>) -> Result<OracleStats, String> {
    let tol = Tolerances::default();
    let mut st = OracleStats::default();
    for c in 0..count as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 32 ^ c);
        let (s, events, probs) = random_run(n, 4 * n * n, 0.2, 0.3, &mut rng, fault, |_, _, _| Ok(()))
            .map_err(|e| format!("circuit {c}: engine error {e}"))?;
        let (v, exact_probs) = evolve(StateVector::plus(n).map_err(|e| e.to_string())?, &events)
            .map_err(|e| format!("circuit {c}: oracle replay failed ({e})"))?;
        let probes: Vec<PauliString> = (0..16).map(|_| random_pauli(n, &mut rng)).collect();
        let regions = vec![vec![0], (0..n / 2).collect(), (n / 2..n).collect()];
        let r = compare(&s, &v, &probes, &regions, tol);
        let trace_probs = probs.iter().zip(&exact_probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        st.circuits += 1;
        st.max_rho_diff = st.max_rho_diff.max(r.max_rho_diff);
        st.max_born_diff = st.max_born_diff.max(r.max_born_diff).max(trace_probs);
        st.max_entropy_diff = st.max_entropy_diff.max(r.max_entropy_diff);
        if !r.pass || trace_probs > tol.born {
            return Err(format!("circuit {c}: {r:?}, outcome probability diff {trace_probs:.3e}"));
        }
    }
    Ok(st)
}

/// Z-basis trajectories: the nullity from the ledger matches enumeration,
/// and so does the Bell-sampled estimate with a generous sample budget.
pub fn nullity_suite(n: usize, count: usize, seed: u64) -> Result<usize, String> {
    let mut cfg = CircuitConfig::new(Model::ZBasisMagic, n);
    cfg.eta = 1.0;
    cfg.beta = 0.0;
    cfg.p_m = 0.3;
    cfg.seed = seed;
    cfg.record_events = true;
    cfg.t_final = Some(3 * n * n);
    let mut checked = 0;
    for i in 0..count as u64 {
        let (rec, tr) = run_trajectory_with_state(&cfg, i);
        let tr = tr.ok_or_else(|| format!("trajectory {i} discarded: {:?}", rec.discarded))?;
        let events = rec.events.as_ref().expect("events recorded");
        let (v, _) = evolve(StateVector::plus(n).map_err(|e| e.to_string())?, events).map_err(|e| e.to_string())?;
        let exact = exact_nullity(&v).map_err(|e| e.to_string())?;
        let t = tr.clifford_tableau().expect("Z-basis runs keep a tableau");
        let Ok(form) = build_bell_form(t, tr.ledger.counts()) else { continue };
        if form.nullity() != exact {
            return Err(format!("trajectory {i}: ledger nullity {} != enumerated {exact}", form.nullity()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let policy = ConvergencePolicy { window: 4 * n, tau_max: 16 * n };
        let (m, _, _) = sample_until_converged(&form, &mut rng, policy);
        if m != exact {
            return Err(format!("trajectory {i}: Bell-sampled nullity {m} != enumerated {exact}"));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Per-event checks: valid tableau, `T` grows terms at most threefold,
/// measurements never add terms, unit trace.
pub fn invariant_suite(n: usize, count: usize, seed: u64, fault: Option<Fault>) -> Result<usize, String> {
    let mut events = 0;
    for c in 0..count as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed ^ c);
        random_run(n, 6 * n * n, 0.2, 0.3, &mut rng, fault, |before, after, ev| {
            events += 1;
            after.tableau().validate().map_err(|e| format!("tableau after {ev:?}: {e}"))?;
            let (b, a) = (before.n_terms(), after.n_terms());
            match ev {
                Event::T(_) if a > 3 * b => return Err(format!("T grew terms {b} -> {a}")),
                Event::Measure { .. } if a > b => return Err(format!("measurement grew terms {b} -> {a}")),
                _ => {}
            }
            let tr = after.trace();
            if (tr - 1.0).abs() > 1e-9 {
                return Err(format!("trace {tr} after {ev:?}"));
            }
            Ok(())
        })?;
    }
    Ok(events)
}

pub fn determinism_suite(seed: u64) -> Result<(), String> {
    let mut cfg = RunConfig::new(ModelName::XBasisPurification, 8);
    cfg.eta = 2.0;
    cfg.p_m = 0.3;
    cfg.n_traj = 8;
    cfg.seed = seed;
    let a = run_ensemble(&cfg, 1).map_err(|e| e.to_string())?;
    let b = run_ensemble(&cfg, 3).map_err(|e| e.to_string())?;
    if a == b {
        Ok(())
    } else {
        Err("records differ between 1 and 3 threads".into())
    }
}

fn timed(name: String, f: impl FnOnce() -> Result<String, String>) -> SuiteResult {
    let t0 = Instant::now();
    let r = f();
    let seconds = t0.elapsed().as_secs_f64();
    match r {
        Ok(detail) => SuiteResult { name, passed: true, detail, seconds },
        Err(detail) => SuiteResult { name, passed: false, detail, seconds },
    }
}

/// Runs every suite of `level`, calling `report` as each finishes.
pub fn run(level: Level, fault: Option<Fault>, mut report: impl FnMut(&SuiteResult)) -> Vec<SuiteResult> {
    let seed = 0x1157;
    let (oracle_sizes, oracle_count): (&[usize], usize) = match level {
        Level::Fast => (&[3, 4, 5, 6], 20),
        Level::Full => (&[4, 6, 8], 200),
    };
    let (nullity_sizes, nullity_count): (&[usize], usize) = match level {
        Level::Fast => (&[3, 4, 5], 20),
        Level::Full => (&[4, 5, 6], 100),
    };
    let mut out = Vec::new();
    let mut push = |r: SuiteResult| {
        report(&r);
        out.push(r);
    };
    for &n in oracle_sizes {
        push(timed(format!("oracle-equivalence L={n}"), || {
            oracle_suite(n, oracle_count, seed, fault).map(|s| {
                format!(
                    "{} circuits, max |Δρ| {:.1e}, |Δp| {:.1e}, |ΔS| {:.1e}",
                    s.circuits, s.max_rho_diff, s.max_born_diff, s.max_entropy_diff
                )
            })
        }));
    }
    for &n in nullity_sizes {
        push(timed(format!("nullity-exactness L={n}"), || {
            nullity_suite(n, nullity_count, seed).map(|k| format!("{k} trajectories agree"))
        }));
    }
    push(timed("invariants".into(), || {
        invariant_suite(5, if level == Level::Fast { 20 } else { 100 }, seed, fault)
            .map(|e| format!("{e} events checked"))
    }));
    push(timed("thread-determinism".into(), || determinism_suite(seed).map(|_| "1 and 3 threads agree".into())));
    out
}
