//! Reduced states and entanglement entropies (base 2).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::f2;
use crate::lrsd::LrsdState;
use crate::oracle;
use crate::pauli::PauliString;
use crate::tableau::{group_overlap, Membership, StabilizerTableau};

/// Default limit on `|A|` for dense reduced matrices.
pub const DEFAULT_REGION_CAP: usize = 14;
/// Eigenvalues below this are treated as exact zeros.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Clusters up to this size are minimized exhaustively in [`max_min_entropy`].
pub const EXHAUSTIVE_CLUSTER_LIMIT: usize = 20;
/// Random balanced bipartitions tried for larger clusters.
pub const SAMPLED_BIPARTITIONS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("region of {0} qubits exceeds the cap of {1}")]
    RegionTooLarge(usize, usize),
    #[error("region contains an invalid or repeated site")]
    BadRegion,
    #[error("a term anticommutes with the stabilizer group")]
    PreconditionViolated,
}

/// Dense reduced density matrix; `region[k]` is bit `k` of the index.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub region: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl ReducedState {
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.matrix.clone())
    }
}

fn check_region(n: usize, region: &[usize]) -> Result<(), EntropyError> {
    let mut seen = vec![false; n];
    for &q in region {
        if q >= n || seen[q] {
            return Err(EntropyError::BadRegion);
        }
        seen[q] = true;
    }
    Ok(())
}

fn complement(n: usize, region: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; n];
    for &q in region {
        inside[q] = true;
    }
    (0..n).filter(|&q| !inside[q]).collect()
}

/// Generators reduced against their restriction to `traced`.
struct Split {
    traced: Vec<usize>,
    /// Pivot rows: (pivot column, restricted bits, full generator product).
    pivots: Vec<(usize, Vec<u64>, PauliString)>,
    /// Generators of the subgroup acting trivially on `traced`.
    inner: Vec<PauliString>,
}

impl Split {
    fn new(gens: &[PauliString], traced: &[usize]) -> Self {
        let mut s = Split { traced: traced.to_vec(), pivots: Vec::new(), inner: Vec::new() };
        for g in gens {
            let (bits, full) = s.reduce(g);
            match f2::lowest_set(&bits) {
                Some(c) => s.pivots.push((c, bits, full)),
                None => s.inner.push(full),
            }
        }
        s
    }

    /// Reduces `p` on the traced sites; returns the residual bits and
    /// `p · (product of used pivots)`.
    fn reduce(&self, p: &PauliString) -> (Vec<u64>, PauliString) {
        let mut bits = p.restrict(&self.traced).symplectic_words();
        let mut full = p.clone();
        for (c, row, g) in &self.pivots {
            if f2::get(&bits, *c) {
                f2::xor_into(&mut bits, row);
                full.mul_assign_right(g);
            }
        }
        (bits, full)
    }
}

/// `tr_B ρ` for `B` the complement of `region`.
pub fn partial_trace(s: &LrsdState, region: &[usize]) -> Result<ReducedState, EntropyError> {
    partial_trace_with_cap(s, region, DEFAULT_REGION_CAP)
}

pub fn partial_trace_with_cap(s: &LrsdState, region: &[usize], cap: usize) -> Result<ReducedState, EntropyError> {
    let n = s.n_qubits();
    check_region(n, region)?;
    if region.len() > cap.min(oracle::MAX_QUBITS) {
        return Err(EntropyError::RegionTooLarge(region.len(), cap.min(oracle::MAX_QUBITS)));
    }
    let traced = complement(n, region);
    let split = Split::new(s.tableau().stabilizers(), &traced);
    let inner_a: Vec<PauliString> = split.inner.iter().map(|t| t.restrict(region)).collect();
    let na = region.len();
    let group = oracle::group_sum(na, &inner_a);
    let da = 1usize << na;
    let mut acc = DMatrix::from_element(da, da, Complex64::new(0.0, 0.0));
    // Σ_σ λ (σ s0)_A, then one multiplication by the subgroup sum.
    let mut coeffs: Vec<(Complex64, PauliString)> = Vec::new();
    for t in s.terms() {
        let (bits, full) = split.reduce(&t.sigma);
        if bits.iter().any(|&w| w != 0) {
            continue;
        }
        coeffs.push((t.coeff, full.restrict(region)));
    }
    for (c, q) in &coeffs {
        let m = oracle::apply_pauli_left(q, &group);
        acc += m * *c;
    }
    acc /= Complex64::new(libm::exp2(na as f64), 0.0);
    Ok(ReducedState { region: region.to_vec(), matrix: acc })
}

/// Eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `S_n = log2(Σ λ^n) / (1-n)`; `n = 1` is the von Neumann limit, `n = 0`
/// the log-rank and `n = ∞` the min-entropy.
pub fn renyi_from_eigenvalues(eigs: &[f64], order: f64) -> f64 {
    let ev = eigs.iter().copied().filter(|&x| x > EIGEN_FLOOR);
    if order == 0.0 {
        return libm::log2(ev.count() as f64);
    }
    if order == 1.0 {
        return -ev.map(|x| x * libm::log2(x)).sum::<f64>();
    }
    if order.is_infinite() {
        return -libm::log2(ev.fold(0.0, f64::max));
    }
    let s: f64 = ev.map(|x| libm::pow(x, order)).sum();
    libm::log2(s) / (1.0 - order)
}

pub fn renyi_entropy(s: &LrsdState, region: &[usize], order: f64) -> Result<f64, EntropyError> {
    let r = partial_trace(s, region)?;
    Ok(renyi_from_eigenvalues(&r.eigenvalues(), order))
}

/// Entropy of the ancilla qubit (von Neumann, bits).
pub fn ancilla_entropy(s: &LrsdState, ancilla: usize) -> f64 {
    if s.n_terms() == 1 && s.terms()[0].sigma.is_identity_bits() {
        return stabilizer_entropy(s.tableau(), &[ancilla]) as f64;
    }
    renyi_entropy(s, &[ancilla], 1.0).expect("single-site region")
}

/// `tr ρ_A²` from overlaps of projected stabilizer states. Requires every term
/// to commute with the stabilizer group.
pub fn purity_commuting(s: &LrsdState, region: &[usize]) -> Result<f64, EntropyError> {
    let n = s.n_qubits();
    check_region(n, region)?;
    let t = s.tableau();
    let mut parts: Vec<(Complex64, Vec<PauliString>)> = Vec::new();
    for term in s.terms() {
        let mut sigma = term.sigma.clone();
        let k = sigma.phase();
        sigma.set_phase(0);
        let w = term.coeff * Complex64::i().powu(k as u32);
        match t.membership(&sigma) {
            Membership::Anticommutes => return Err(EntropyError::PreconditionViolated),
            Membership::InGroup(sign) => parts.push((w * sign as f64, t.stabilizers().to_vec())),
            Membership::CommutesOutside => {
                for sgn in [0u8, 2] {
                    let mut gens = t.stabilizers().to_vec();
                    let mut g = sigma.clone();
                    g.set_phase(sgn);
                    gens.push(g);
                    let weight = if sgn == 0 { w * 0.5 } else { -w * 0.5 };
                    parts.push((weight, gens));
                }
            }
        }
    }
    let traced = complement(n, region);
    let reduced: Vec<Vec<PauliString>> = parts
        .iter()
        .map(|(_, g)| Split::new(g, &traced).inner.iter().map(|p| p.restrict(region)).collect())
        .collect();
    let na = region.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, (wj, _)) in parts.iter().enumerate() {
        for (k, (wk, _)) in parts.iter().enumerate() {
            let o = group_overlap(na, &reduced[j], &reduced[k]);
            if o != 0.0 {
                acc += wj * wk * o;
            }
        }
    }
    let trace: Complex64 = parts.iter().map(|(w, _)| *w).sum();
    Ok(acc.re / (trace.re * trace.re))
}

/// Entropy of `region` for a stabilizer state: `|A| - dim S_A`.
pub fn stabilizer_entropy(t: &StabilizerTableau, region: &[usize]) -> usize {
    let n = t.n_qubits();
    if t.is_pure() && n <= 64 {
        let mask = region.iter().fold(0u64, |m, &q| m | 1 << q);
        return masked_rank(t.stabilizers(), mask) - region.len();
    }
    let traced = complement(n, region);
    let rank_b = f2::rank(t.stabilizers().iter().map(|g| g.restrict(&traced).symplectic_words()));
    region.len() + rank_b - t.rank()
}

/// Rank of the generators restricted to the sites in `mask` (`n ≤ 64`).
fn masked_rank(gens: &[PauliString], mask: u64) -> usize {
    let mut rows: Vec<u128> = Vec::with_capacity(gens.len());
    for g in gens {
        let x = g.x_words().first().copied().unwrap_or(0) & mask;
        let z = g.z_words().first().copied().unwrap_or(0) & mask;
        let mut v = x as u128 | (z as u128) << 64;
        for &r in &rows {
            let piv = r & r.wrapping_neg();
            if v & piv != 0 {
                v ^= r;
            }
        }
        if v != 0 {
            // Keep rows reduced against each other's lowest bits.
            let piv = v & v.wrapping_neg();
            for r in rows.iter_mut() {
                if *r & piv != 0 {
                    *r ^= v;
                }
            }
            rows.push(v);
        }
    }
    rows.len()
}

fn min_balanced_entropy(t: &StabilizerTableau, cluster: &[usize]) -> usize {
    let c = cluster.len();
    if c < 2 {
        return 0;
    }
    let k = c / 2;
    let entropy_of = |sel: &[usize]| {
        let a: Vec<usize> = sel.iter().map(|&i| cluster[i]).collect();
        stabilizer_entropy(t, &a)
    };
    let mut best = usize::MAX;
    if c <= EXHAUSTIVE_CLUSTER_LIMIT {
        // Gosper's hack over k-subsets of the cluster.
        let mut set: u64 = (1u64 << k) - 1;
        let limit = 1u64 << c;
        let mut sel = Vec::with_capacity(k);
        while set < limit {
            sel.clear();
            sel.extend((0..c).filter(|&i| set >> i & 1 == 1));
            best = best.min(entropy_of(&sel));
            if best == 0 {
                break;
            }
            let lo = set & set.wrapping_neg();
            let ripple = set + lo;
            set = (((ripple ^ set) >> 2) / lo) | ripple;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b1a5 ^ c as u64);
        for _ in 0..SAMPLED_BIPARTITIONS {
            let sel = sample(&mut rng, c, k).into_vec();
            best = best.min(entropy_of(&sel));
        }
    }
    best
}

/// `max_i min_{A ⊂ C_i, |A| = ⌊|C_i|/2⌋} S_A`. For stabilizer states every
/// Rényi order gives the same value, so `order` only documents intent.
pub fn max_min_entropy(t: &StabilizerTableau, clusters: &[Vec<usize>], order: f64) -> f64 {
    let _ = order;
    clusters.iter().map(|c| min_balanced_entropy(t, c)).max().unwrap_or(0) as f64
}

/// Same minimization with random bipartitions regardless of size; used to
/// check the sampled path against the exhaustive one.
pub fn max_min_entropy_sampled(t: &StabilizerTableau, clusters: &[Vec<usize>], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = 0usize;
    for cluster in clusters {
        let c = cluster.len();
        if c < 2 {
            continue;
        }
        let mut best = usize::MAX;
        for _ in 0..samples {
            let a: Vec<usize> = sample(&mut rng, c, c / 2).into_iter().map(|i| cluster[i]).collect();
            best = best.min(stabilizer_entropy(t, &a));
        }
        out = out.max(best);
    }
    out as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::CliffordGate;

    fn bell() -> LrsdState {
        let mut s = LrsdState::plus_state(2);
        s.apply_clifford(&CliffordGate::H(1)).unwrap();
        s.apply_clifford(&CliffordGate::CX(0, 1)).unwrap();
        s
    }

    #[test]
    fn bell_pair_marginal_is_mixed() {
        let s = bell();
        let r = partial_trace(&s, &[0]).unwrap();
        assert!((r.matrix[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!(r.matrix[(0, 1)].norm() < 1e-14);
        for n in [0.5, 1.0, 2.0, 3.0] {
            assert!((renyi_entropy(&s, &[1], n).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(ancilla_entropy(&s, 0), 1.0);
    }

    #[test]
    fn product_state_marginal() {
        let mut s = LrsdState::zero_state(2);
        s.apply_clifford(&CliffordGate::H(1)).unwrap();
        let r = partial_trace(&s, &[1]).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((r.matrix[(i, j)].re - 0.5).abs() < 1e-14);
        }
        assert!(renyi_entropy(&s, &[0], 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn region_cap() {
        let s = LrsdState::zero_state(3);
        assert_eq!(partial_trace_with_cap(&s, &[0, 1], 1).unwrap_err(), EntropyError::RegionTooLarge(2, 1));
    }

    #[test]
    fn ghz_max_min_is_one() {
        let n = 6;
        let mut t = StabilizerTableau::plus_state(n);
        for q in 1..n {
            t.apply_clifford(&CliffordGate::H(q)).unwrap();
            t.apply_clifford(&CliffordGate::CX(0, q)).unwrap();
        }
        let all: Vec<usize> = (0..n).collect();
        assert_eq!(max_min_entropy(&t, &[all], 2.0), 1.0);
        let prod = StabilizerTableau::zero_state(n);
        let singles: Vec<Vec<usize>> = (0..n).map(|q| vec![q]).collect();
        assert_eq!(max_min_entropy(&prod, &singles, 1.0), 0.0);
    }
}
