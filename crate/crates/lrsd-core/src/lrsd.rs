//! Low-rank stabilizer decompositions `ρ = Σ_l λ_l σ_l ρ_S`.
//!
//! Every `σ_l` commutes with the stabilizer group of `ρ_S`. After any event
//! that changes the logical basis the terms are rewritten as products of the
//! current logical operators (`σ_l = ∏ (l^x_k)^{a_k} (l^z_k)^{b_k}` with phase
//! zero), so duplicate strings merge and the trace is the coefficient of the
//! identity term.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::oracle;
use crate::pauli::{Letter, PauliString};
use crate::tableau::{CliffordGate, Membership, StabilizerTableau, TableauError};

/// Coefficients below this magnitude are dropped during merging.
pub const MERGE_FLOOR: f64 = 1e-14;
/// Forced branches below this probability are rejected.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LrsdError {
    #[error("forced branch has probability {0:e}")]
    ZeroProbabilityBranch(f64),
    #[error("no terms survive; trajectory discarded")]
    InvalidTrajectory,
    #[error("measured operator is not Hermitian")]
    NonHermitian,
    #[error("term {0} does not match the register size")]
    TermLength(usize),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

/// Constants of `T σ T† = c₁ σ + c₂ σ'` for `σ` with an `X` or `Y` on the site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TGateConstants {
    pub alpha: f64,
    /// `β_T = -i sin(π/8)`, stored as its imaginary part.
    pub beta_im: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TGateConstants {
    pub fn new() -> Self {
        let alpha = libm::cos(FRAC_PI_8);
        let beta_im = -libm::sin(FRAC_PI_8);
        // α² + β² with β imaginary, and 2iαβ.
        let c1 = alpha * alpha - beta_im * beta_im;
        let c2 = -2.0 * alpha * beta_im;
        Self { alpha, beta_im, c1, c2 }
    }
}

impl Default for TGateConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// Which branch of the `T`-gate update ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TCase {
    /// `Z_j` in the group, or commuting with everything.
    I,
    /// `Z_j` anticommutes with the group, all terms commute with it.
    II,
    /// `Z_j` commutes with the group, some term anticommutes with it.
    III,
    /// Both anticommute.
    IV,
}

/// One weighted Pauli term.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: Complex64,
    pub sigma: PauliString,
}

#[derive(Clone, Debug)]
pub struct LrsdState {
    tableau: StabilizerTableau,
    terms: Vec<Term>,
    cutoff: f64,
}

fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl LrsdState {
    /// A pure stabilizer state: one identity term.
    pub fn from_tableau(tableau: StabilizerTableau) -> Self {
        let n = tableau.n_qubits();
        let terms = alloc::vec![Term { coeff: Complex64::new(1.0, 0.0), sigma: PauliString::identity(n) }];
        Self { tableau, terms, cutoff: 0.0 }
    }

    pub fn zero_state(n: usize) -> Self {
        Self::from_tableau(StabilizerTableau::zero_state(n))
    }

    pub fn plus_state(n: usize) -> Self {
        Self::from_tableau(StabilizerTableau::plus_state(n))
    }

    /// Assembles a state from explicit terms without canonicalizing them.
    pub fn from_parts(tableau: StabilizerTableau, terms: Vec<Term>, cutoff: f64) -> Result<Self, LrsdError> {
        let n = tableau.n_qubits();
        if let Some(i) = terms.iter().position(|t| t.sigma.n_qubits() != n) {
            return Err(LrsdError::TermLength(i));
        }
        if terms.is_empty() {
            return Err(LrsdError::InvalidTrajectory);
        }
        Ok(Self { tableau, terms, cutoff: cutoff.max(0.0) })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.tableau.n_qubits()
    }

    pub fn tableau(&self) -> &StabilizerTableau {
        &self.tableau
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn set_cutoff(&mut self, eps: f64) {
        self.cutoff = eps.max(0.0);
    }

    /// `(2L+1)² + |λ|·L + |λ|` stored numbers.
    pub fn entry_count(&self) -> u64 {
        entry_count(self.n_qubits(), self.n_terms())
    }

    pub fn apply_clifford(&mut self, g: &CliffordGate) -> Result<(), LrsdError> {
        self.tableau.apply_clifford(g)?;
        let pg = g.prepare();
        for t in &mut self.terms {
            pg.conjugate(&mut t.sigma);
        }
        Ok(())
    }

    /// Writes `σ ρ_S = f · L ρ_S` with `L` a phase-zero product of logicals.
    /// Returns `None` when `σ` anticommutes with the group.
    fn canonical_form(&self, sigma: &PauliString) -> Option<(Complex64, PauliString)> {
        let t = &self.tableau;
        if t.stabilizers().iter().any(|g| g.anticommutes(sigma)) {
            return None;
        }
        let n = self.n_qubits();
        let mut logical = PauliString::identity(n);
        for (lx, lz) in t.logical_x().iter().zip(t.logical_z()) {
            if sigma.anticommutes(lz) {
                logical.mul_assign_right(lx);
            }
            if sigma.anticommutes(lx) {
                logical.mul_assign_right(lz);
            }
        }
        let mut full = PauliString::identity(n);
        for (g, d) in t.stabilizers().iter().zip(t.destabilizers()) {
            if sigma.anticommutes(d) {
                full.mul_assign_right(g);
            }
        }
        full.mul_assign_right(&logical);
        debug_assert!(full.same_bits(sigma), "logical decomposition failed");
        // σ = i^c · G·L and G ρ_S = ρ_S.
        let c = (sigma.phase() + 4 - full.phase()) & 3;
        let f = i_pow(c + logical.phase());
        logical.set_phase(0);
        Some((f, logical))
    }

    /// Rewrites every term in the current logical basis, merges duplicates
    /// and drops negligible coefficients.
    pub fn canonicalize(&mut self) {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in core::mem::take(&mut self.terms) {
            let (f, sigma) = self
                .canonical_form(&t.sigma)
                .expect("terms commute with the stabilizer group");
            out.push(Term { coeff: t.coeff * f, sigma });
        }
        self.terms = merge_terms(out);
    }

    /// `tr ρ`: the identity-term coefficient (real part) of a canonical state.
    pub fn trace(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.sigma.is_identity_bits())
            .map(|t| (t.coeff * i_pow(t.sigma.phase())).re)
            .sum()
    }

    fn renormalize(&mut self) -> Result<(), LrsdError> {
        let tr = self.trace();
        if !(tr.abs() > MERGE_FLOOR) || self.terms.is_empty() {
            return Err(LrsdError::InvalidTrajectory);
        }
        let k = 1.0 / tr;
        for t in &mut self.terms {
            t.coeff *= k;
        }
        Ok(())
    }

    /// `tr(P ρ)`; the terms must be logical products in the current basis.
    fn pauli_expectation(&self, p: &PauliString) -> Complex64 {
        let Some((f, lp)) = self.canonical_form(p) else {
            return Complex64::new(0.0, 0.0);
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            if t.sigma.same_bits(&lp) {
                let mut prod = lp.clone();
                prod.mul_assign_right(&t.sigma);
                acc += f * t.coeff * i_pow(prod.phase());
            }
        }
        acc
    }

    /// `tr((I+P)/2 · ρ)`, clamped to `[0, 1]`.
    pub fn born_probability(&self, p: &PauliString) -> f64 {
        let tr = self.trace();
        let e = self.pauli_expectation(p).re;
        (0.5 * (tr + e) / tr).clamp(0.0, 1.0)
    }

    /// Applies `T = diag(1, e^{iπ/4})` on `site`.
    pub fn apply_t_gate(&mut self, site: usize) -> Result<TCase, LrsdError> {
        let n = self.n_qubits();
        if site >= n {
            return Err(TableauError::BadSites.into());
        }
        let z = PauliString::single(n, site, Letter::Z);
        let any_anti = self.terms.iter().any(|t| t.sigma.x_bit(site));
        match (self.tableau.membership(&z), any_anti) {
            (Membership::InGroup(_), _) | (Membership::CommutesOutside, false) => Ok(TCase::I),
            (Membership::CommutesOutside, true) => {
                let mut out = Vec::with_capacity(2 * self.terms.len());
                for t in core::mem::take(&mut self.terms) {
                    if t.sigma.x_bit(site) {
                        let mut partner = z.clone();
                        partner.mul_assign_right(&t.sigma);
                        partner.add_phase(3);
                        out.push(Term { coeff: t.coeff * FRAC_1_SQRT_2, sigma: t.sigma });
                        out.push(Term { coeff: t.coeff * FRAC_1_SQRT_2, sigma: partner });
                    } else {
                        out.push(t);
                    }
                }
                self.terms = out;
                self.canonicalize();
                Ok(TCase::III)
            }
            (Membership::Anticommutes, anti) => {
                if anti {
                    let pbar = self
                        .tableau
                        .stabilizers()
                        .iter()
                        .find(|g| g.anticommutes(&z))
                        .expect("anticommuting generator")
                        .clone();
                    for t in &mut self.terms {
                        if t.sigma.x_bit(site) {
                            t.sigma.mul_assign_right(&pbar);
                        }
                    }
                }
                self.fork_on_decomposition(&z);
                Ok(if anti { TCase::IV } else { TCase::II })
            }
        }
    }

    /// `ρ_S = (I + P̄) ρ_S^P`, then `T P̄ T† = (P̄ + P̄')/√2`.
    fn fork_on_decomposition(&mut self, z: &PauliString) {
        let (pbar, reduced) = self
            .tableau
            .decompose_stabilizer(z)
            .expect("caller checked anticommutation");
        let mut pbar2 = z.clone();
        pbar2.mul_assign_right(&pbar);
        pbar2.add_phase(3);
        let mut out = Vec::with_capacity(3 * self.terms.len());
        for t in core::mem::take(&mut self.terms) {
            let mut a = t.sigma.clone();
            a.mul_assign_right(&pbar);
            let mut b = t.sigma.clone();
            b.mul_assign_right(&pbar2);
            let w = t.coeff * FRAC_1_SQRT_2;
            out.push(t);
            out.push(Term { coeff: w, sigma: a });
            out.push(Term { coeff: w, sigma: b });
        }
        self.tableau = reduced;
        self.terms = out;
        self.canonicalize();
    }

    /// Projective measurement of the Hermitian `p`. Returns the outcome and its
    /// probability; the state is renormalized.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        p: &PauliString,
        forced: Option<i8>,
        rng: &mut R,
    ) -> Result<(i8, f64), LrsdError> {
        if !p.is_hermitian() {
            return Err(LrsdError::NonHermitian);
        }
        if p.n_qubits() != self.n_qubits() {
            return Err(TableauError::LengthMismatch(p.n_qubits(), self.n_qubits()).into());
        }
        let p_up = self.born_probability(p);
        let outcome = match forced {
            Some(o) => o.signum(),
            None => {
                if rng.gen::<f64>() < p_up {
                    1
                } else {
                    -1
                }
            }
        };
        let prob = if outcome > 0 { p_up } else { 1.0 - p_up };
        if prob < MIN_BRANCH_PROBABILITY {
            return Err(LrsdError::ZeroProbabilityBranch(prob));
        }
        let anti_stab = self.tableau.stabilizers().iter().find(|g| g.anticommutes(p)).cloned();
        match anti_stab {
            Some(pbar) => {
                for t in &mut self.terms {
                    if t.sigma.anticommutes(p) {
                        t.sigma.mul_assign_right(&pbar);
                    }
                }
            }
            None => self.terms.retain(|t| t.sigma.commutes(p)),
        }
        if self.terms.is_empty() {
            return Err(LrsdError::InvalidTrajectory);
        }
        self.tableau.measure_pauli(p, Some(outcome), rng)?;
        self.canonicalize();
        self.renormalize()?;
        Ok((outcome, prob))
    }

    /// Drops terms with `|λ| ≤ ε` and renormalizes.
    pub fn truncate(&mut self, eps: f64) -> Result<(), LrsdError> {
        if eps > 0.0 {
            self.terms.retain(|t| t.coeff.norm() > eps);
        }
        if self.terms.is_empty() {
            return Err(LrsdError::InvalidTrajectory);
        }
        self.renormalize()
    }

    /// Truncates at the stored cutoff (no-op when it is zero).
    pub fn truncate_to_cutoff(&mut self) -> Result<(), LrsdError> {
        if self.cutoff > 0.0 {
            self.truncate(self.cutoff)
        } else {
            Ok(())
        }
    }

    /// Dense `Σ λ σ ρ_S`; only for small registers.
    pub fn to_density_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_qubits();
        assert!(n <= oracle::MAX_QUBITS, "dense assembly limited to {} qubits", oracle::MAX_QUBITS);
        let mut rho_s = oracle::group_sum(n, self.tableau.stabilizers());
        rho_s /= Complex64::new(libm::exp2(n as f64), 0.0);
        let dim = 1usize << n;
        let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for t in &self.terms {
            out += oracle::apply_pauli_left(&t.sigma, &rho_s) * t.coeff;
        }
        out
    }
}

/// `(2L+1)² + n_terms·L + n_terms`.
pub fn entry_count(n: usize, n_terms: usize) -> u64 {
    let l = n as u64;
    let k = n_terms as u64;
    (2 * l + 1) * (2 * l + 1) + k * l + k
}

/// Sorts by bit key, folds phases into coefficients and sums duplicates.
pub fn merge_terms(mut terms: Vec<Term>) -> Vec<Term> {
    for t in &mut terms {
        t.coeff *= i_pow(t.sigma.phase());
        t.sigma.set_phase(0);
    }
    terms.sort_by(|a, b| a.sigma.cmp_bits(&b.sigma));
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.sigma.same_bits(&t.sigma) => last.coeff += t.coeff,
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coeff.norm() >= MERGE_FLOOR);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn constants() {
        let c = TGateConstants::new();
        assert!((c.c1 - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c.c2 - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn entry_count_examples() {
        assert_eq!(entry_count(50, 1), 10_252);
        assert_eq!(entry_count(4, 3), 96);
    }

    #[test]
    fn t_on_zero_is_case_one() {
        let mut s = LrsdState::zero_state(1);
        assert_eq!(s.apply_t_gate(0).unwrap(), TCase::I);
        assert_eq!(s.n_terms(), 1);
    }

    #[test]
    fn t_plus_density_and_probabilities() {
        let mut s = LrsdState::plus_state(1);
        s.apply_t_gate(0).unwrap();
        let rho = s.to_density_matrix();
        let w = Complex64::from_polar(0.5, core::f64::consts::FRAC_PI_4);
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((rho[(1, 0)] - w).norm() < 1e-14);
        assert!((rho[(0, 1)] - w.conj()).norm() < 1e-14);
        assert!((s.born_probability(&p("Z")) - 0.5).abs() < 1e-14);
        let c = libm::cos(FRAC_PI_8);
        assert!((s.born_probability(&p("X")) - c * c).abs() < 1e-14);
    }

    #[test]
    fn measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = LrsdState::zero_state(1);
        assert_eq!(s.measure(&p("Z"), None, &mut rng).unwrap(), (1, 1.0));
        assert!(matches!(s.measure(&p("Z"), Some(-1), &mut rng), Err(LrsdError::ZeroProbabilityBranch(_))));
    }

    #[test]
    fn truncation_drops_small_terms() {
        let t = StabilizerTableau::maximally_mixed(1);
        let terms = alloc::vec![
            Term { coeff: Complex64::new(0.9, 0.0), sigma: p("I") },
            Term { coeff: Complex64::new(1e-6, 0.0), sigma: p("Z") },
        ];
        let mut s = LrsdState::from_parts(t, terms, 0.0).unwrap();
        let before = s.clone();
        s.truncate(0.0).unwrap();
        assert_eq!(s.n_terms(), before.n_terms());
        s.truncate(1e-3).unwrap();
        assert_eq!(s.n_terms(), 1);
        assert!((s.trace() - 1.0).abs() < 1e-15);
    }
}
