//! Stabilizer nullity by Bell sampling for `∏_i T_i^{N_i} |φ⟩` with `|φ⟩` a
//! stabilizer state.
//!
//! Each `T^{N}` splits as `T^a S^b Z^c` with `(a, b, c)` the bits of
//! `N mod 8`. The Clifford part is absorbed into the tableau; the `k` sites
//! with `a = 1` each get a primary pair `(g_j, h_j)` with `T g_j T† =
//! (g_j + h_j)/√2`, and the remaining generators are isotropic. Samples from
//! `|ψ⟩ ⊗ |ψ*⟩` are an isotropic element times, for `m ~ Binomial(k, 1/2)`
//! chosen pairs, one of `g_j` or `h_j`. Shifting by `σ_{r0}`, where
//! `σ_{r0}|ψ⟩ ∝ |ψ*⟩`, gives samples from `|ψ⟩ ⊗ |ψ⟩`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::f2;
use crate::pauli::{Letter, PauliString};
use crate::tableau::{CliffordGate, StabilizerTableau};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MagicError {
    #[error("Bell form needs a pure tableau")]
    MixedStateUnsupported,
    #[error("T count vector has {0} entries for {1} qubits")]
    CountLength(usize, usize),
    /// A `T` site whose `Z` is fixed only jointly with two or more other `T`
    /// sites; the layer is then a multi-qubit rotation.
    #[error("T on site {0} acts as a multi-qubit rotation on this state")]
    EntangledTLayer(usize),
}

/// Bits `(a, b, c)` of `N mod 8` with `T^N = T^a S^b Z^c`.
pub fn t_power_decomposition(n: u32) -> (bool, bool, bool) {
    let r = n % 8;
    (r & 1 == 1, r & 2 == 2, r & 4 == 4)
}

/// Isotropic and primary-pair structure of a single `T` layer on a stabilizer state.
#[derive(Clone, Debug)]
pub struct BellForm {
    n: usize,
    /// Per-site counts after merging redundant `T` sites.
    counts: Vec<u32>,
    iso: Vec<PauliString>,
    /// `(site, g, h)` for each residual `T`.
    pss: Vec<(usize, PauliString, PauliString)>,
    r0: PauliString,
}

impl BellForm {
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Residual `T` count `k = Σ a_i`.
    pub fn k(&self) -> usize {
        self.pss.len()
    }

    pub fn isotropic(&self) -> &[PauliString] {
        &self.iso
    }

    pub fn pairs(&self) -> &[(usize, PauliString, PauliString)] {
        &self.pss
    }

    pub fn effective_counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn r0(&self) -> &PauliString {
        &self.r0
    }

    /// The `L`-dimensional base space: isotropic generators plus every `g_j`.
    pub fn base(&self) -> Vec<PauliString> {
        self.iso.iter().cloned().chain(self.pss.iter().map(|(_, g, _)| g.clone())).collect()
    }

    /// `M` for this structure: `k` primary pairs leave a `2^{L-k}` stabilizer group.
    pub fn nullity(&self) -> usize {
        self.k()
    }
}

enum Attempt {
    Done(Vec<PauliString>, Vec<(usize, PauliString)>),
    Merge { site: usize, into: usize, sign: i8 },
    Drop(usize),
}

fn attempt(t: &StabilizerTableau, t_sites: &[usize]) -> Result<Attempt, MagicError> {
    let n = t.n_qubits();
    let mut rows: Vec<PauliString> = t.stabilizers().to_vec();
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for &j in t_sites {
        let Some(k) = (r..rows.len()).find(|&k| rows[k].x_bit(j)) else { continue };
        rows.swap(r, k);
        let piv = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.x_bit(j) {
                row.mul_assign_right(&piv);
            }
        }
        pivot_rows.push((j, r));
        r += 1;
    }
    for &j in t_sites {
        if pivot_rows.iter().any(|&(s, _)| s == j) {
            continue;
        }
        // Column j is a sum of pivot columns; Z_j ∏_{q∈Q} Z_q is then a stabilizer.
        let q: Vec<usize> = pivot_rows.iter().filter(|&&(_, row)| rows[row].x_bit(j)).map(|&(s, _)| s).collect();
        return match q.len() {
            0 => Ok(Attempt::Drop(j)),
            1 => {
                let mut zz = PauliString::single(n, j, Letter::Z);
                zz.set_z(q[0], true);
                let sign = match t.membership(&zz) {
                    crate::tableau::Membership::InGroup(s) => s,
                    _ => unreachable!("ZZ commutes with a pure group"),
                };
                Ok(Attempt::Merge { site: j, into: q[0], sign })
            }
            _ => Err(MagicError::EntangledTLayer(j)),
        };
    }
    let pss: Vec<(usize, PauliString)> = pivot_rows.iter().map(|&(s, row)| (s, rows[row].clone())).collect();
    let iso = rows.into_iter().skip(r).collect();
    Ok(Attempt::Done(iso, pss))
}

/// Builds the Bell form of `∏ T_i^{N_i} |φ⟩`.
///
/// A `T` site whose `Z` is a stabilizer (up to sign) is a phase and is
/// dropped; one whose `Z` equals `±Z_q` on the state for another `T` site `q`
/// is merged into `q` (`N_q += ±1`).
pub fn build_bell_form(t: &StabilizerTableau, t_counts: &[u32]) -> Result<BellForm, MagicError> {
    let n = t.n_qubits();
    if !t.is_pure() {
        return Err(MagicError::MixedStateUnsupported);
    }
    if t_counts.len() != n {
        return Err(MagicError::CountLength(t_counts.len(), n));
    }
    let mut counts: Vec<u32> = t_counts.iter().map(|c| c % 8).collect();
    loop {
        let mut tt = t.clone();
        let mut t_sites = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            let (a, b, z) = t_power_decomposition(c);
            if b {
                tt.apply_clifford(&CliffordGate::S(i)).expect("site in range");
            }
            if z {
                tt.apply_clifford(&CliffordGate::Z(i)).expect("site in range");
            }
            if a {
                t_sites.push(i);
            }
        }
        match attempt(&tt, &t_sites)? {
            Attempt::Drop(j) => counts[j] &= !1,
            Attempt::Merge { site, into, sign } => {
                counts[site] &= !1;
                counts[into] = if sign > 0 { (counts[into] + 1) % 8 } else { (counts[into] + 7) % 8 };
            }
            Attempt::Done(iso, pss) => {
                let pss: Vec<(usize, PauliString, PauliString)> = pss
                    .into_iter()
                    .map(|(j, g)| {
                        let mut h = PauliString::single(n, j, Letter::Z);
                        h.mul_assign_right(&g);
                        h.add_phase(3);
                        (j, g, h)
                    })
                    .collect();
                let r0 = compute_r0_parts(n, &iso, &pss);
                return Ok(BellForm { n, counts, iso, pss, r0 });
            }
        }
    }
}

/// Solves `ω(σ, v) = #Y(v) mod 2` for `v` ranging over the isotropic
/// generators and both members of every primary pair. Then `σ Q σ = Q*` for
/// every Pauli in the expansion of `|ψ⟩⟨ψ|`, so `σ|ψ⟩ ∝ |ψ*⟩`.
///
/// When every constraint vector has even `Y` parity (real state) the
/// solution is the identity.
fn compute_r0_parts(n: usize, iso: &[PauliString], pss: &[(usize, PauliString, PauliString)]) -> PauliString {
    let constraints: Vec<&PauliString> =
        iso.iter().chain(pss.iter().flat_map(|(_, g, h)| [g, h])).collect();
    // ω(σ, v) = σ_x·v_z + σ_z·v_x, so the row for v is (v_z | v_x).
    let rows: Vec<Vec<u64>> = constraints
        .iter()
        .map(|v| {
            let mut w = vec![0u64; (2 * n).div_ceil(64)];
            for j in 0..n {
                if v.z_bit(j) {
                    f2::set(&mut w, j);
                }
                if v.x_bit(j) {
                    f2::set(&mut w, n + j);
                }
            }
            w
        })
        .collect();
    let rhs: Vec<bool> = constraints.iter().map(|v| v.y_parity()).collect();
    let sol = f2::solve(&rows, &rhs, 2 * n).expect("independent constraints are solvable");
    let x: Vec<bool> = (0..n).map(|j| f2::get(&sol, j)).collect();
    let z: Vec<bool> = (0..n).map(|j| f2::get(&sol, n + j)).collect();
    PauliString::from_bits(&x, &z, 0)
}

/// `σ_{r0}` with `σ_{r0}|ψ⟩ ∝ |ψ*⟩`.
pub fn compute_r0(f: &BellForm) -> PauliString {
    f.r0.clone()
}

/// Draws `m ~ Binomial(k, 1/2)` by `k` fair coins.
pub fn sample_pair_count<R: Rng + ?Sized>(k: usize, rng: &mut R) -> usize {
    (0..k).filter(|_| rng.gen::<bool>()).count()
}

/// One sample from the Bell measurement of `|ψ⟩ ⊗ |ψ*⟩` (phase zero).
pub fn bell_sample_conj<R: Rng + ?Sized>(f: &BellForm, rng: &mut R) -> PauliString {
    let mut acc = PauliString::identity(f.n);
    for g in &f.iso {
        if rng.gen::<bool>() {
            acc = acc.xor_bits(g);
        }
    }
    let k = f.k();
    let m = sample_pair_count(k, rng);
    if m > 0 {
        for idx in sample(rng, k, m).into_iter() {
            let (_, g, h) = &f.pss[idx];
            acc = acc.xor_bits(if rng.gen::<bool>() { g } else { h });
        }
    }
    acc
}

/// One sample from the Bell measurement of `|ψ⟩ ⊗ |ψ⟩`.
pub fn bell_sample<R: Rng + ?Sized>(f: &BellForm, rng: &mut R) -> PauliString {
    bell_sample_conj(f, rng).xor_bits(&f.r0)
}

/// Distinct samples and the number of draws that produced them.
#[derive(Clone, Debug, Default)]
pub struct BellSampleSet {
    pub samples: Vec<PauliString>,
    pub counts: Vec<usize>,
    pub steps: usize,
}

impl BellSampleSet {
    pub fn push(&mut self, s: PauliString) {
        self.steps += 1;
        match self.samples.iter().position(|p| p.same_bits(&s)) {
            Some(i) => self.counts[i] += 1,
            None => {
                self.samples.push(s);
                self.counts.push(1);
            }
        }
    }

    pub fn n_distinct(&self) -> usize {
        self.samples.len()
    }
}

/// Online `M = max(0, G' - L)` with `G'` the rank of the sample differences
/// together with the base space.
#[derive(Clone, Debug)]
pub struct NullityEstimator {
    n: usize,
    basis: f2::Basis,
    first: Option<Vec<u64>>,
}

impl NullityEstimator {
    pub fn new(n: usize, base: &[PauliString]) -> Self {
        let mut basis = f2::Basis::new();
        for b in base {
            basis.insert(b.symplectic_words());
        }
        Self { n, basis, first: None }
    }

    pub fn push(&mut self, sample: &PauliString) -> usize {
        let v = sample.symplectic_words();
        match &self.first {
            None => self.first = Some(v),
            Some(f) => {
                let mut d = v;
                f2::xor_into(&mut d, f);
                self.basis.insert(d);
            }
        }
        self.nullity()
    }

    pub fn nullity(&self) -> usize {
        self.basis.rank().saturating_sub(self.n)
    }
}

/// Batch form of [`NullityEstimator`].
pub fn estimate_nullity(samples: &BellSampleSet, base: &[PauliString], n: usize) -> usize {
    let mut est = NullityEstimator::new(n, base);
    for s in &samples.samples {
        est.push(s);
    }
    est.nullity()
}

/// Stopping rule for [`sample_until_converged`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvergencePolicy {
    pub window: usize,
    pub tau_max: usize,
}

impl ConvergencePolicy {
    /// `W = max(4, L/8)`, `τ_max = 2L`.
    pub fn for_size(n: usize) -> Self {
        Self { window: (n / 8).max(4), tau_max: 2 * n }
    }
}

/// Samples until `M` is unchanged for `window` consecutive draws or
/// `tau_max` draws are made. Returns `(M, τ, samples)`.
pub fn sample_until_converged<R: Rng + ?Sized>(
    f: &BellForm,
    rng: &mut R,
    policy: ConvergencePolicy,
) -> (usize, usize, BellSampleSet) {
    let window = policy.window.max(1);
    let mut est = NullityEstimator::new(f.n, &f.base());
    let mut set = BellSampleSet::default();
    let mut m = 0;
    let mut stable = 0;
    while set.steps < policy.tau_max.max(1) {
        let s = bell_sample(f, rng);
        let m_new = est.push(&s);
        set.push(s);
        if m_new == m {
            stable += 1;
        } else {
            m = m_new;
            stable = 0;
        }
        if stable >= window {
            break;
        }
    }
    (m, set.steps, set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, StateVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn t_power_examples() {
        assert_eq!(t_power_decomposition(5), (true, false, true));
        assert_eq!(t_power_decomposition(7), (true, true, true));
        assert_eq!(t_power_decomposition(4), (false, false, true));
    }

    #[test]
    fn even_counts_give_stabilizer_form() {
        let t = StabilizerTableau::plus_state(3);
        let f = build_bell_form(&t, &[2, 4, 6]).unwrap();
        assert_eq!(f.k(), 0);
        assert_eq!(f.isotropic().len(), 3);
    }

    #[test]
    fn single_t_on_plus() {
        let f = build_bell_form(&StabilizerTableau::plus_state(1), &[1]).unwrap();
        assert_eq!(f.k(), 1);
        let (_, g, h) = &f.pairs()[0];
        assert_eq!(g.to_string(), "+X");
        assert_eq!(h.to_string(), "+Y");
    }

    #[test]
    fn redundant_t_sites_merge() {
        // |00⟩: Z_0 is a stabilizer, so the T is a phase.
        let f = build_bell_form(&StabilizerTableau::zero_state(2), &[1, 0]).unwrap();
        assert_eq!(f.k(), 0);
        // Bell pair (XX, ZZ): T_0 T_1 acts as S on one site.
        let mut t = StabilizerTableau::plus_state(2);
        t.apply_clifford(&CliffordGate::H(1)).unwrap();
        t.apply_clifford(&CliffordGate::CX(0, 1)).unwrap();
        let f = build_bell_form(&t, &[1, 1]).unwrap();
        assert_eq!(f.k(), 0);
        assert_eq!(f.effective_counts().iter().sum::<u32>(), 2);
    }

    #[test]
    fn r0_conjugates_y_eigenstate() {
        let mut t = StabilizerTableau::plus_state(1);
        t.apply_clifford(&CliffordGate::S(0)).unwrap();
        let f = build_bell_form(&t, &[0]).unwrap();
        let r0 = compute_r0(&f);
        assert!(["+X", "+Z"].contains(&r0.to_string().as_str()));
        let mut v = StateVector::plus(1).unwrap();
        v.apply_gate(&CliffordGate::S(0));
        let mut w = v.clone();
        w.apply_pauli(&r0);
        assert!((w.inner(&v.conj()).norm() - 1.0).abs() < 1e-12);
        let real = build_bell_form(&StabilizerTableau::plus_state(2), &[0, 0]).unwrap();
        assert!(compute_r0(&real).is_identity_bits());
    }

    #[test]
    fn nullity_from_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = build_bell_form(&StabilizerTableau::plus_state(2), &[1, 1]).unwrap();
        let (m, _, _) = sample_until_converged(&f, &mut rng, ConvergencePolicy { window: 64, tau_max: 64 });
        assert_eq!(m, 2);
        let mut v = StateVector::plus(2).unwrap();
        v.apply_t(0);
        v.apply_t(1);
        assert_eq!(oracle::exact_nullity(&v).unwrap(), 2);
        let stab = build_bell_form(&StabilizerTableau::zero_state(3), &[0, 0, 0]).unwrap();
        let (m, tau, _) = sample_until_converged(&stab, &mut rng, ConvergencePolicy::for_size(3));
        assert_eq!((m, tau), (0, 4));
    }
}
