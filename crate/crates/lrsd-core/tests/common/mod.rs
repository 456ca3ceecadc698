//! Shared random-circuit helpers for the integration tests.
#![allow(dead_code)]

use lrsd_core::circuits::Event;
use lrsd_core::lrsd::LrsdState;
use lrsd_core::oracle::StateVector;
use lrsd_core::pauli::{Letter, PauliString};
use lrsd_core::tableau::{sample_two_qubit_clifford, CliffordGate};
use rand::Rng;

pub fn random_pauli<R: Rng>(n: usize, rng: &mut R) -> PauliString {
    loop {
        let letters: Vec<Letter> = (0..n)
            .map(|_| [Letter::I, Letter::X, Letter::Y, Letter::Z][rng.gen_range(0..4)])
            .collect();
        let p = PauliString::from_letters(&letters);
        if !p.is_identity_bits() {
            let mut p = p;
            if rng.gen::<bool>() {
                p.set_phase(2);
            }
            return p;
        }
    }
}

pub fn random_clifford<R: Rng>(n: usize, rng: &mut R) -> CliffordGate {
    let q = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= q {
        b += 1;
    }
    match rng.gen_range(0..8) {
        0 => CliffordGate::H(q),
        1 => CliffordGate::S(q),
        2 => CliffordGate::X(q),
        3 => CliffordGate::Y(q),
        4 => CliffordGate::Z(q),
        5 => CliffordGate::CZ(q, b),
        6 => CliffordGate::CX(q, b),
        _ => sample_two_qubit_clifford(rng, q, b),
    }
}

/// Mixed Clifford / T / measurement circuit driven through the engine, which
/// samples the outcomes; the returned events carry them for forced replay.
pub fn random_run<R: Rng>(
    n: usize,
    depth: usize,
    p_t: f64,
    p_meas: f64,
    rng: &mut R,
    mut check: impl FnMut(&LrsdState, &Event),
) -> (LrsdState, Vec<Event>) {
    let mut s = LrsdState::plus_state(n);
    let mut events = Vec::new();
    for _ in 0..depth {
        let u: f64 = rng.gen();
        let ev = if u < p_t {
            let q = rng.gen_range(0..n);
            s.apply_t_gate(q).unwrap();
            Event::T(q)
        } else if u < p_t + p_meas {
            let p = if rng.gen::<bool>() {
                PauliString::single(n, rng.gen_range(0..n), if rng.gen() { Letter::X } else { Letter::Z })
            } else {
                random_pauli(n, rng)
            };
            let (outcome, _) = s.measure(&p, None, rng).unwrap();
            Event::Measure { pauli: p, outcome }
        } else {
            let g = random_clifford(n, rng);
            s.apply_clifford(&g).unwrap();
            Event::Clifford(g)
        };
        check(&s, &ev);
        events.push(ev);
    }
    (s, events)
}

pub fn oracle_of(n: usize, events: &[Event]) -> StateVector {
    lrsd_core::oracle::evolve(StateVector::plus(n).unwrap(), events).unwrap().0
}
