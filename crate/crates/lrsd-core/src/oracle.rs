//! Dense state-vector reference used to check the engine at small sizes.
//!
//! Qubit `j` is bit `j` of the basis index. Pauli action follows the same
//! `Y = iXZ` convention as [`PauliString`].

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::circuits::Event;
use crate::lrsd::LrsdState;
use crate::pauli::PauliString;
use crate::tableau::{two_qubit_images, CliffordGate};

/// Largest register the oracle accepts.
pub const MAX_QUBITS: usize = 12;
/// Largest register for the `4^L` enumerations.
pub const MAX_ENUM_QUBITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("branch has probability {0:e}")]
    ZeroProbabilityBranch(f64),
    #[error("{0} qubits exceeds the oracle limit")]
    TooLarge(usize),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => ONE,
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `(x mask, z mask, phase including the Y factors)` for a string on ≤ 64 qubits.
fn masks(p: &PauliString) -> (usize, usize, u8) {
    let x = p.x_words().first().copied().unwrap_or(0) as usize;
    let z = p.z_words().first().copied().unwrap_or(0) as usize;
    let ny = (x & z).count_ones() as u8;
    (x, z, (p.phase() + ny) & 3)
}

/// `P|b⟩ = coeff · |b ⊕ x⟩`.
#[inline]
fn pauli_action(x: usize, z: usize, k: u8, b: usize) -> (usize, Complex64) {
    let sign = if (z & b).count_ones() & 1 == 1 { 2 } else { 0 };
    (b ^ x, i_pow(k + sign))
}

/// Dense matrix of a Pauli string.
pub fn pauli_matrix(p: &PauliString) -> DMatrix<Complex64> {
    let n = p.n_qubits();
    let dim = 1usize << n;
    let (x, z, k) = masks(p);
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for b in 0..dim {
        let (r, c) = pauli_action(x, z, k, b);
        m[(r, b)] = c;
    }
    m
}

/// `M ← P · M` without forming `P`.
pub fn apply_pauli_left(p: &PauliString, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (x, z, k) = masks(p);
    let mut out = DMatrix::from_element(m.nrows(), m.ncols(), ZERO);
    for b in 0..m.nrows() {
        let (r, c) = pauli_action(x, z, k, b);
        for col in 0..m.ncols() {
            out[(r, col)] = c * m[(b, col)];
        }
    }
    out
}

/// `Σ_{s ∈ ⟨gens⟩} s` as a dense matrix. Generators must commute.
pub fn group_sum(n: usize, gens: &[PauliString]) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    let mut s = PauliString::identity(n);
    let total = 1usize << gens.len();
    for step in 0..total {
        if step > 0 {
            // Gray code: toggle one generator per step.
            let bit = step.trailing_zeros() as usize;
            s.mul_assign_right(&gens[bit]);
        }
        let (x, z, k) = masks(&s);
        for b in 0..dim {
            let (r, c) = pauli_action(x, z, k, b);
            m[(r, b)] += c;
        }
    }
    m
}

/// Dense state vector on `n ≤ 12` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Result<Self, OracleError> {
        if n > MAX_QUBITS {
            return Err(OracleError::TooLarge(n));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(Self { n, amps })
    }

    pub fn plus(n: usize) -> Result<Self, OracleError> {
        let mut v = Self::zero(n)?;
        let a = Complex64::new(libm::exp2(-(n as f64) / 2.0), 0.0);
        v.amps.iter_mut().for_each(|c| *c = a);
        Ok(v)
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, OracleError> {
        let n = amps.len().trailing_zeros() as usize;
        assert_eq!(1usize << n, amps.len(), "length must be a power of two");
        if n > MAX_QUBITS {
            return Err(OracleError::TooLarge(n));
        }
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Complex conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        Self { n: self.n, amps: self.amps.iter().map(|a| a.conj()).collect() }
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply_pauli(&mut self, p: &PauliString) {
        let (x, z, k) = masks(p);
        let mut out = vec![ZERO; self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let (r, c) = pauli_action(x, z, k, b);
            out[r] = c * a;
        }
        self.amps = out;
    }

    pub fn expectation(&self, p: &PauliString) -> Complex64 {
        let mut w = self.clone();
        w.apply_pauli(p);
        self.inner(&w)
    }

    fn apply_1q(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        let m = 1usize << q;
        for b in 0..self.amps.len() {
            if b & m == 0 {
                let (a0, a1) = (self.amps[b], self.amps[b | m]);
                self.amps[b] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[b | m] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    /// Applies a 4×4 unitary on `(a, b)`; local index is `bit_a | bit_b << 1`.
    fn apply_2q(&mut self, a: usize, b: usize, u: &[[Complex64; 4]; 4]) {
        let (ma, mb) = (1usize << a, 1usize << b);
        for base in 0..self.amps.len() {
            if base & (ma | mb) != 0 {
                continue;
            }
            let idx = [base, base | ma, base | mb, base | ma | mb];
            let v = idx.map(|i| self.amps[i]);
            for r in 0..4 {
                self.amps[idx[r]] = (0..4).map(|c| u[r][c] * v[c]).sum();
            }
        }
    }

    pub fn apply_gate(&mut self, g: &CliffordGate) {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *g {
            CliffordGate::H(q) => self.apply_1q(q, [[c(h, 0.), c(h, 0.)], [c(h, 0.), c(-h, 0.)]]),
            CliffordGate::S(q) => self.apply_1q(q, [[ONE, ZERO], [ZERO, c(0., 1.)]]),
            CliffordGate::X(q) => self.apply_1q(q, [[ZERO, ONE], [ONE, ZERO]]),
            CliffordGate::Y(q) => self.apply_1q(q, [[ZERO, c(0., -1.)], [c(0., 1.), ZERO]]),
            CliffordGate::Z(q) => self.apply_1q(q, [[ONE, ZERO], [ZERO, c(-1., 0.)]]),
            CliffordGate::CZ(a, b) => {
                let m = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *amp = -*amp;
                    }
                }
            }
            CliffordGate::CX(ctl, t) => {
                let (mc, mt) = (1usize << ctl, 1usize << t);
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            CliffordGate::TwoQubit { index, a, b } => {
                let u = two_qubit_unitary(index);
                self.apply_2q(a, b, &u);
            }
        }
    }

    pub fn apply_t(&mut self, q: usize) {
        let w = Complex64::from_polar(1.0, core::f64::consts::FRAC_PI_4);
        self.apply_1q(q, [[ONE, ZERO], [ZERO, w]]);
    }

    /// Probability of `outcome` when measuring the Hermitian `p`.
    pub fn probability(&self, p: &PauliString, outcome: i8) -> f64 {
        let e = self.expectation(p).re;
        (0.5 + 0.5 * outcome as f64 * e).clamp(0.0, 1.0)
    }

    /// Projects onto the `outcome` eigenspace of `p`, renormalizes, and
    /// returns the branch probability.
    pub fn measure(&mut self, p: &PauliString, outcome: i8) -> Result<f64, OracleError> {
        let mut w = self.clone();
        w.apply_pauli(p);
        let s = outcome as f64;
        let proj: Vec<Complex64> = self.amps.iter().zip(&w.amps).map(|(a, b)| (a + b * s) * 0.5).collect();
        let prob: f64 = proj.iter().map(|a| a.norm_sqr()).sum();
        if prob < 1e-12 {
            return Err(OracleError::ZeroProbabilityBranch(prob));
        }
        let k = 1.0 / libm::sqrt(prob);
        self.amps = proj.into_iter().map(|a| a * k).collect();
        Ok(prob)
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let d = self.amps.len();
        DMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj())
    }

    /// `tr_B |ψ⟩⟨ψ|` with `region[k]` mapped to bit `k` of the reduced index.
    pub fn reduced_density_matrix(&self, region: &[usize]) -> DMatrix<Complex64> {
        let da = 1usize << region.len();
        let mut rho = DMatrix::from_element(da, da, ZERO);
        let amask: usize = region.iter().map(|&q| 1usize << q).sum();
        let local = |b: usize| region.iter().enumerate().map(|(k, &q)| ((b >> q) & 1) << k).sum::<usize>();
        // Group amplitudes by the traced-out configuration.
        let mut by_env: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); 1 << (self.n - region.len())];
        let env_sites: Vec<usize> = (0..self.n).filter(|q| amask >> q & 1 == 0).collect();
        for (b, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let e: usize = env_sites.iter().enumerate().map(|(k, &q)| ((b >> q) & 1) << k).sum();
            by_env[e].push((local(b), a));
        }
        for group in &by_env {
            for &(r, ar) in group {
                for &(c, ac) in group {
                    rho[(r, c)] += ar * ac.conj();
                }
            }
        }
        rho
    }
}

/// Unitary (up to global phase) realizing the enumerated two-qubit Clifford.
///
/// Built from the conjugation images: `U|00⟩` is the joint `+1` eigenvector
/// of the images of `Z_a, Z_b`, and `U|x_a x_b⟩ = U X_a^{x_a} X_b^{x_b} U† U|00⟩`.
pub fn two_qubit_unitary(index: u16) -> [[Complex64; 4]; 4] {
    let imgs = two_qubit_images(index).map(|(v, neg)| {
        let mut p = PauliString::from_bits(&[v & 1 != 0, v & 4 != 0], &[v & 2 != 0, v & 8 != 0], 0);
        if neg {
            p.set_phase(2);
        }
        p
    });
    let proj = |p: &PauliString, v: &StateVector| {
        let mut w = v.clone();
        w.apply_pauli(p);
        StateVector { n: 2, amps: v.amps.iter().zip(&w.amps).map(|(a, b)| (a + b) * 0.5).collect() }
    };
    let mut v0 = None;
    for start in 0..4 {
        let mut e = StateVector { n: 2, amps: vec![ZERO; 4] };
        e.amps[start] = ONE;
        let w = proj(&imgs[3], &proj(&imgs[1], &e));
        let nrm = w.norm_sqr();
        if nrm > 1e-6 {
            let k = 1.0 / libm::sqrt(nrm);
            v0 = Some(StateVector { n: 2, amps: w.amps.iter().map(|a| a * k).collect() });
            break;
        }
    }
    let v0 = v0.expect("commuting independent images have a joint eigenvector");
    let mut u = [[ZERO; 4]; 4];
    for col in 0..4 {
        let mut v = v0.clone();
        if col & 1 != 0 {
            v.apply_pauli(&imgs[0]);
        }
        if col & 2 != 0 {
            v.apply_pauli(&imgs[2]);
        }
        for row in 0..4 {
            u[row][col] = v.amps[row];
        }
    }
    u
}

/// Runs `events` from `init`. Measurement events are forced to their recorded
/// outcome; returns the final state and each measurement's probability.
pub fn evolve(init: StateVector, events: &[Event]) -> Result<(StateVector, Vec<f64>), OracleError> {
    let mut v = init;
    let mut probs = Vec::new();
    for e in events {
        match e {
            Event::Clifford(g) => v.apply_gate(g),
            Event::T(q) => v.apply_t(*q),
            Event::Measure { pauli, outcome } => probs.push(v.measure(pauli, *outcome)?),
        }
    }
    Ok((v, probs))
}

fn enum_pauli(n: usize, r: usize) -> PauliString {
    let x: Vec<bool> = (0..n).map(|j| r >> j & 1 == 1).collect();
    let z: Vec<bool> = (0..n).map(|j| r >> (n + j) & 1 == 1).collect();
    PauliString::from_bits(&x, &z, 0)
}

/// `M = L - log2 |{P : |⟨ψ|P|ψ⟩| = 1}|` by enumerating all `4^L` strings.
pub fn exact_nullity(v: &StateVector) -> Result<usize, OracleError> {
    let n = v.n;
    if n > MAX_ENUM_QUBITS {
        return Err(OracleError::TooLarge(n));
    }
    let count = (0..1usize << (2 * n))
        .filter(|&r| (v.expectation(&enum_pauli(n, r)).norm() - 1.0).abs() < 1e-9)
        .count();
    let log = count.trailing_zeros() as usize;
    debug_assert_eq!(1usize << log, count, "stabilizer count is a power of two");
    Ok(n - log)
}

/// `p(r) = 2^{-L} |⟨ψ|σ_r|ψ*⟩|²` indexed by `r = x | z << L`.
pub fn bell_distribution(v: &StateVector) -> Result<Vec<f64>, OracleError> {
    let n = v.n;
    if n > MAX_ENUM_QUBITS {
        return Err(OracleError::TooLarge(n));
    }
    let vc = v.conj();
    let scale = libm::exp2(-(n as f64));
    Ok((0..1usize << (2 * n))
        .map(|r| {
            let mut w = vc.clone();
            w.apply_pauli(&enum_pauli(n, r));
            v.inner(&w).norm_sqr() * scale
        })
        .collect())
}

/// The `4^L` index of a string's bits, matching [`bell_distribution`].
pub fn bell_index(p: &PauliString) -> usize {
    let (x, z, _) = masks(p);
    x | z << p.n_qubits()
}

/// Differences between an engine state and the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub max_rho_diff: f64,
    pub max_born_diff: f64,
    pub max_entropy_diff: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rho: f64,
    pub born: f64,
    pub entropy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rho: 1e-9, born: 1e-10, entropy: 1e-8 }
    }
}

/// Compares density matrices, Born probabilities on `probes`, and Rényi
/// entropies (orders 1, 2, 3) on `regions`.
pub fn compare(
    s: &LrsdState,
    v: &StateVector,
    probes: &[PauliString],
    regions: &[Vec<usize>],
    tol: Tolerances,
) -> CompareReport {
    let rho = s.to_density_matrix();
    let exact = v.density_matrix();
    let max_rho_diff = (rho - exact).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let max_born_diff = probes
        .iter()
        .map(|p| (s.born_probability(p) - v.probability(p, 1)).abs())
        .fold(0.0, f64::max);
    let mut max_entropy_diff: f64 = 0.0;
    for region in regions {
        let ev_exact = crate::entropy::hermitian_eigenvalues(v.reduced_density_matrix(region));
        for order in [1.0, 2.0, 3.0] {
            let a = crate::entropy::renyi_entropy(s, region, order);
            let b = crate::entropy::renyi_from_eigenvalues(&ev_exact, order);
            let d = match a {
                Ok(a) => (a - b).abs(),
                Err(_) => f64::INFINITY,
            };
            max_entropy_diff = max_entropy_diff.max(d);
        }
    }
    let pass = max_rho_diff <= tol.rho && max_born_diff <= tol.born && max_entropy_diff <= tol.entropy;
    CompareReport { max_rho_diff, max_born_diff, max_entropy_diff, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn evolve_examples() {
        let mut v = StateVector::zero(1).unwrap();
        v.apply_gate(&CliffordGate::H(0));
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!(close(v.amps[0], Complex64::new(h, 0.0)) && close(v.amps[1], Complex64::new(h, 0.0)));
        v.apply_t(0);
        assert!(close(v.amps[1], Complex64::from_polar(h, core::f64::consts::FRAC_PI_4)));

        let mut v = StateVector::plus(2).unwrap();
        v.apply_gate(&CliffordGate::CZ(0, 1));
        let q = Complex64::new(0.5, 0.0);
        assert_eq!(v.amps, vec![q, q, q, -q]);
    }

    #[test]
    fn pauli_convention_matches_products() {
        // Y = iXZ and XZ = -iY in the shared convention.
        let y = pauli_matrix(&p("Y"));
        let xz = pauli_matrix(&p("X")) * pauli_matrix(&p("Z"));
        assert!((y.clone() - xz.clone() * Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((pauli_matrix(&p("-iY")) - xz).norm() < 1e-14);
    }

    #[test]
    fn gate_conjugation_matches_dense() {
        let gates = [
            CliffordGate::H(0),
            CliffordGate::S(1),
            CliffordGate::X(0),
            CliffordGate::Y(1),
            CliffordGate::Z(0),
            CliffordGate::CZ(0, 1),
            CliffordGate::CZ(1, 0),
            CliffordGate::CX(0, 1),
            CliffordGate::CX(1, 0),
            CliffordGate::TwoQubit { index: 7777, a: 1, b: 0 },
        ];
        for g in gates {
            let mut u = DMatrix::from_element(4, 4, ZERO);
            for col in 0..4 {
                let mut e = StateVector::zero(2).unwrap();
                e.amps = vec![ZERO; 4];
                e.amps[col] = ONE;
                e.apply_gate(&g);
                for row in 0..4 {
                    u[(row, col)] = e.amps[row];
                }
            }
            for r in 0..16 {
                let mut q = enum_pauli(2, r);
                let dense = &u * pauli_matrix(&q) * u.adjoint();
                g.conjugate(&mut q);
                assert!((dense - pauli_matrix(&q)).norm() < 1e-12, "{g:?} on pattern {r}");
            }
        }
    }

    #[test]
    fn nullity_and_bell_examples() {
        let mut v = StateVector::plus(1).unwrap();
        assert_eq!(exact_nullity(&v).unwrap(), 0);
        v.apply_t(0);
        assert_eq!(exact_nullity(&v).unwrap(), 1);
        let d = bell_distribution(&v).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let mut v2 = StateVector::plus(2).unwrap();
        v2.apply_t(0);
        v2.apply_t(1);
        assert_eq!(exact_nullity(&v2).unwrap(), 2);
        let stab = StateVector::plus(2).unwrap();
        let d = bell_distribution(&stab).unwrap();
        let support: Vec<f64> = d.into_iter().filter(|&x| x > 1e-12).collect();
        assert_eq!(support.len(), 4);
        assert!(support.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }
}
