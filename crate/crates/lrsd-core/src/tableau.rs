//! Mixed stabilizer states with destabilizers and explicit logical pairs.
//!
//! A tableau of rank `r` on `L` qubits stores `r` stabilizer generators
//! `g_i`, their destabilizers `d_i`, and `L - r` logical pairs
//! `(l^x_k, l^z_k)`. The normalized state is
//! `ρ_S = 2^{-L} ∏_i (I + g_i)`.
//!
//! Measurement follows the three-case update: a measured Pauli either
//! anticommutes with some stabilizer (random outcome, rank unchanged), lies in
//! the stabilizer group (deterministic), or commutes with the group while
//! anticommuting with a logical (random outcome, rank grows by one).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::f2;
use crate::pauli::{Letter, PauliString};

/// Number of two-qubit Clifford classes modulo global phase.
pub const TWO_QUBIT_CLIFFORD_COUNT: u16 = 11_520;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableauError {
    #[error("forced outcome has probability zero")]
    ForcedImpossible,
    #[error("operator commutes with every stabilizer")]
    NotAnticommuting,
    #[error("state is mixed (rank {rank} < {n})")]
    MixedState { rank: usize, n: usize },
    #[error("measured operator is not Hermitian")]
    NonHermitian,
    #[error("gate site out of range or repeated")]
    BadSites,
    #[error("length mismatch: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("invariant violated: {0}")]
    Invalid(String),
}

/// Clifford gates understood by the tableau and the LRSD engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    X(usize),
    Y(usize),
    Z(usize),
    CZ(usize, usize),
    /// Control, target.
    CX(usize, usize),
    /// Element `index` of the enumerated two-qubit Clifford group on `(a, b)`.
    TwoQubit { index: u16, a: usize, b: usize },
}

impl CliffordGate {
    pub fn sites(&self) -> (usize, Option<usize>) {
        match *self {
            CliffordGate::H(q)
            | CliffordGate::S(q)
            | CliffordGate::X(q)
            | CliffordGate::Y(q)
            | CliffordGate::Z(q) => (q, None),
            CliffordGate::CZ(a, b) | CliffordGate::CX(a, b) => (a, Some(b)),
            CliffordGate::TwoQubit { a, b, .. } => (a, Some(b)),
        }
    }

    pub fn check(&self, n: usize) -> Result<(), TableauError> {
        let (a, b) = self.sites();
        let ok = a < n
            && match b {
                Some(b) => b < n && b != a,
                None => true,
            };
        let idx_ok = match self {
            CliffordGate::TwoQubit { index, .. } => *index < TWO_QUBIT_CLIFFORD_COUNT,
            _ => true,
        };
        if ok && idx_ok {
            Ok(())
        } else {
            Err(TableauError::BadSites)
        }
    }

    /// Precomputes whatever the gate needs for repeated conjugation.
    pub fn prepare(&self) -> PreparedGate {
        match *self {
            CliffordGate::TwoQubit { index, a, b } => PreparedGate::Table { a, b, table: local_table(index) },
            g => PreparedGate::Simple(g),
        }
    }

    /// `p ← g p g†` with exact phase.
    pub fn conjugate(&self, p: &mut PauliString) {
        self.prepare().conjugate(p);
    }
}

/// A gate ready for conjugating many strings.
#[derive(Debug, Clone)]
pub enum PreparedGate {
    Simple(CliffordGate),
    /// Image of each local 4-bit pattern `(x_a, z_a, x_b, z_b)`: output bits and added phase.
    Table { a: usize, b: usize, table: [(u8, u8); 16] },
}

impl PreparedGate {
    pub fn conjugate(&self, p: &mut PauliString) {
        match *self {
            PreparedGate::Simple(g) => conjugate_simple(g, p),
            PreparedGate::Table { a, b, ref table } => {
                let v = local_bits(p, a, b);
                let (w, dk) = table[v as usize];
                set_local_bits(p, a, b, w);
                p.add_phase(dk);
            }
        }
    }
}

#[inline(always)]
fn conjugate_h(p: &mut PauliString, q: usize) {
    let (x, z) = (p.x_bit(q), p.z_bit(q));
    if x && z {
        p.add_phase(2);
    }
    p.set_x(q, z);
    p.set_z(q, x);
}

#[inline(always)]
fn conjugate_cz(p: &mut PauliString, a: usize, b: usize) {
    let (xa, za, xb, zb) = (p.x_bit(a), p.z_bit(a), p.x_bit(b), p.z_bit(b));
    if xa && xb && (za ^ zb) {
        p.add_phase(2);
    }
    if xb {
        p.flip_z(a);
    }
    if xa {
        p.flip_z(b);
    }
}

#[inline]
fn conjugate_simple(g: CliffordGate, p: &mut PauliString) {
    match g {
        CliffordGate::H(q) => conjugate_h(p, q),
        CliffordGate::S(q) => {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            if x {
                if z {
                    p.add_phase(2);
                }
                p.flip_z(q);
            }
        }
        CliffordGate::X(q) => {
            if p.z_bit(q) {
                p.add_phase(2);
            }
        }
        CliffordGate::Y(q) => {
            if p.x_bit(q) ^ p.z_bit(q) {
                p.add_phase(2);
            }
        }
        CliffordGate::Z(q) => {
            if p.x_bit(q) {
                p.add_phase(2);
            }
        }
        CliffordGate::CZ(a, b) => conjugate_cz(p, a, b),
        CliffordGate::CX(c, t) => {
            let (xc, zc, xt, zt) = (p.x_bit(c), p.z_bit(c), p.x_bit(t), p.z_bit(t));
            if xc && zt && !(xt ^ zc) {
                p.add_phase(2);
            }
            if xc {
                p.flip_x(t);
            }
            if zt {
                p.flip_z(c);
            }
        }
        CliffordGate::TwoQubit { .. } => unreachable!("table gates are prepared"),
    }
}

fn local_bits(p: &PauliString, a: usize, b: usize) -> u8 {
    (p.x_bit(a) as u8) | (p.z_bit(a) as u8) << 1 | (p.x_bit(b) as u8) << 2 | (p.z_bit(b) as u8) << 3
}

fn set_local_bits(p: &mut PauliString, a: usize, b: usize, v: u8) {
    p.set_x(a, v & 1 != 0);
    p.set_z(a, v & 2 != 0);
    p.set_x(b, v & 4 != 0);
    p.set_z(b, v & 8 != 0);
}

fn local_omega(u: u8, v: u8) -> bool {
    let s = (u & 1) & (v >> 1) ^ (u >> 1 & 1) & (v & 1) ^ (u >> 2 & 1) & (v >> 3 & 1) ^ (u >> 3 & 1) & (v >> 2 & 1);
    s & 1 == 1
}

fn nth_matching(k: usize, pred: impl Fn(u8) -> bool) -> u8 {
    (1u8..16).filter(|&v| pred(v)).nth(k).expect("enumeration index in range")
}

/// Images of `X_a, Z_a, X_b, Z_b` (4-bit local pattern, sign bit) for a group index.
///
/// The symplectic part is unranked from `index / 16` by choosing, in
/// ascending pattern order, an image for `X_a` (15 ways), for `Z_a` among
/// patterns anticommuting with it (8), for `X_b` in the commutant (3) and for
/// `Z_b` (2). The low four bits of `index` are the signs. Index 0 is the
/// identity.
pub fn two_qubit_images(index: u16) -> [(u8, bool); 4] {
    assert!(index < TWO_QUBIT_CLIFFORD_COUNT);
    let signs = index % 16;
    let mut s = (index / 16) as usize;
    let i4 = s % 2;
    s /= 2;
    let i3 = s % 3;
    s /= 3;
    let i2 = s % 8;
    let i1 = s / 8;
    let xa = nth_matching(i1, |_| true);
    let za = nth_matching(i2, |v| local_omega(v, xa));
    let xb = nth_matching(i3, |v| !local_omega(v, xa) && !local_omega(v, za));
    let zb = nth_matching(i4, |v| !local_omega(v, xa) && !local_omega(v, za) && local_omega(v, xb));
    [
        (xa, signs & 1 != 0),
        (za, signs & 2 != 0),
        (xb, signs & 4 != 0),
        (zb, signs & 8 != 0),
    ]
}

fn local_pauli(v: u8, negative: bool) -> PauliString {
    let mut p = PauliString::identity(2);
    set_local_bits(&mut p, 0, 1, v);
    if negative {
        p.set_phase(2);
    }
    p
}

fn local_table(index: u16) -> [(u8, u8); 16] {
    let imgs = two_qubit_images(index).map(|(v, s)| local_pauli(v, s));
    let mut table = [(0u8, 0u8); 16];
    for (v, slot) in table.iter_mut().enumerate() {
        let v = v as u8;
        // Operator with bits v is i^{x_a z_a + x_b z_b} X_a^{x_a} Z_a^{z_a} X_b^{x_b} Z_b^{z_b}.
        let mut acc = PauliString::identity(2);
        let mut k = 0u8;
        if v & 3 == 3 {
            k += 1;
        }
        if v & 12 == 12 {
            k += 1;
        }
        for (bit, img) in imgs.iter().enumerate() {
            if v >> bit & 1 == 1 {
                acc.mul_assign_right(img);
            }
        }
        acc.add_phase(k);
        *slot = (local_bits(&acc, 0, 1), acc.phase());
    }
    table
}

/// Draws a uniformly random two-qubit Clifford on sites `(a, b)`.
pub fn sample_two_qubit_clifford<R: Rng + ?Sized>(rng: &mut R, a: usize, b: usize) -> CliffordGate {
    let index = rng.gen_range(0..TWO_QUBIT_CLIFFORD_COUNT);
    CliffordGate::TwoQubit { index, a, b }
}

/// Result of [`StabilizerTableau::membership`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// `±P` is in the group; the payload is the sign `s` with `sP ∈ S`.
    InGroup(i8),
    CommutesOutside,
    Anticommutes,
}

/// Which branch a measurement took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureCase {
    /// Anticommutes with a stabilizer.
    Random,
    /// Already in the group.
    Deterministic,
    /// Commutes with the group, anticommutes with a logical.
    Logical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub outcome: i8,
    pub probability: f64,
    pub case: MeasureCase,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    stabilizers: Vec<PauliString>,
    destabilizers: Vec<PauliString>,
    logical_x: Vec<PauliString>,
    logical_z: Vec<PauliString>,
}

impl StabilizerTableau {
    /// `|0…0⟩`.
    pub fn zero_state(n: usize) -> Self {
        let stabilizers = (0..n).map(|j| PauliString::single(n, j, Letter::Z)).collect();
        let destabilizers = (0..n).map(|j| PauliString::single(n, j, Letter::X)).collect();
        Self { n, stabilizers, destabilizers, logical_x: Vec::new(), logical_z: Vec::new() }
    }

    /// `|+…+⟩`.
    pub fn plus_state(n: usize) -> Self {
        let stabilizers = (0..n).map(|j| PauliString::single(n, j, Letter::X)).collect();
        let destabilizers = (0..n).map(|j| PauliString::single(n, j, Letter::Z)).collect();
        Self { n, stabilizers, destabilizers, logical_x: Vec::new(), logical_z: Vec::new() }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let logical_x = (0..n).map(|j| PauliString::single(n, j, Letter::X)).collect();
        let logical_z = (0..n).map(|j| PauliString::single(n, j, Letter::Z)).collect();
        Self { n, stabilizers: Vec::new(), destabilizers: Vec::new(), logical_x, logical_z }
    }

    /// Assembles a tableau from explicit rows and validates it.
    pub fn from_parts(
        n: usize,
        stabilizers: Vec<PauliString>,
        destabilizers: Vec<PauliString>,
        logical_x: Vec<PauliString>,
        logical_z: Vec<PauliString>,
    ) -> Result<Self, TableauError> {
        let t = Self { n, stabilizers, destabilizers, logical_x, logical_z };
        t.validate()?;
        Ok(t)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.stabilizers.len()
    }

    pub fn is_pure(&self) -> bool {
        self.rank() == self.n
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.stabilizers
    }

    pub fn destabilizers(&self) -> &[PauliString] {
        &self.destabilizers
    }

    pub fn logical_x(&self) -> &[PauliString] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliString] {
        &self.logical_z
    }


    #[inline]
    fn for_each_row(&mut self, mut f: impl FnMut(&mut PauliString)) {
        self.stabilizers.iter_mut().for_each(&mut f);
        self.destabilizers.iter_mut().for_each(&mut f);
        self.logical_x.iter_mut().for_each(&mut f);
        self.logical_z.iter_mut().for_each(&mut f);
    }

    /// Conjugates every stored row by `g`.
    pub fn apply_clifford(&mut self, g: &CliffordGate) -> Result<(), TableauError> {
        g.check(self.n)?;
        match *g {
            CliffordGate::CZ(a, b) => self.for_each_row(|row| conjugate_cz(row, a, b)),
            CliffordGate::H(q) => self.for_each_row(|row| conjugate_h(row, q)),
            CliffordGate::X(q) => self.for_each_row(|row| {
                if row.z_bit(q) {
                    row.add_phase(2);
                }
            }),
            CliffordGate::TwoQubit { .. } => {
                let pg = g.prepare();
                self.for_each_row(|row| pg.conjugate(row));
            }
            g => self.for_each_row(|row| conjugate_simple(g, row)),
        }
        Ok(())
    }

    fn first_anticommuting_stabilizer(&self, p: &PauliString) -> Option<usize> {
        self.stabilizers.iter().position(|g| g.anticommutes(p))
    }

    /// Product of the stabilizers whose destabilizers anticommute with `p`.
    /// Equals `±p` exactly when `p` commutes with the group and has no
    /// logical component.
    fn reconstruct(&self, p: &PauliString) -> PauliString {
        let mut acc = PauliString::identity(self.n);
        for (g, d) in self.stabilizers.iter().zip(&self.destabilizers) {
            if d.anticommutes(p) {
                acc.mul_assign_right(g);
            }
        }
        acc
    }

    pub fn membership(&self, p: &PauliString) -> Membership {
        debug_assert_eq!(p.n_qubits(), self.n);
        if self.first_anticommuting_stabilizer(p).is_some() {
            return Membership::Anticommutes;
        }
        let g = self.reconstruct(p);
        if !g.same_bits(p) {
            return Membership::CommutesOutside;
        }
        match (p.phase() + 4 - g.phase()) & 3 {
            0 => Membership::InGroup(1),
            2 => Membership::InGroup(-1),
            // p = ±i g: not Hermitian relative to the group; treat as outside.
            _ => Membership::CommutesOutside,
        }
    }

    /// Measures the Hermitian Pauli `p`, updating the tableau in place.
    pub fn measure_pauli<R: Rng + ?Sized>(
        &mut self,
        p: &PauliString,
        forced: Option<i8>,
        rng: &mut R,
    ) -> Result<Measurement, TableauError> {
        if p.n_qubits() != self.n {
            return Err(TableauError::LengthMismatch(p.n_qubits(), self.n));
        }
        if !p.is_hermitian() {
            return Err(TableauError::NonHermitian);
        }
        if let Some(i1) = self.first_anticommuting_stabilizer(p) {
            let outcome = forced.unwrap_or_else(|| if rng.gen::<bool>() { 1 } else { -1 });
            self.install_anticommuting(p, i1, outcome);
            return Ok(Measurement { outcome, probability: 0.5, case: MeasureCase::Random });
        }
        let first_logical = self
            .logical_x
            .iter()
            .chain(self.logical_z.iter())
            .position(|l| l.anticommutes(p));
        match first_logical {
            None => {
                let g = self.reconstruct(p);
                debug_assert!(g.same_bits(p), "commuting operator outside the group without logical component");
                let sign: i8 = if (p.phase() + 4 - g.phase()) & 3 == 0 { 1 } else { -1 };
                if let Some(f) = forced {
                    if f != sign {
                        return Err(TableauError::ForcedImpossible);
                    }
                }
                Ok(Measurement { outcome: sign, probability: 1.0, case: MeasureCase::Deterministic })
            }
            Some(pos) => {
                let outcome = forced.unwrap_or_else(|| if rng.gen::<bool>() { 1 } else { -1 });
                self.install_logical(p, pos, outcome);
                Ok(Measurement { outcome, probability: 0.5, case: MeasureCase::Logical })
            }
        }
    }

    /// Random-outcome update: `g_{i1}` becomes the destabilizer of `±p`.
    fn install_anticommuting(&mut self, p: &PauliString, i1: usize, outcome: i8) {
        let g1 = self.stabilizers[i1].clone();
        for j in 0..self.stabilizers.len() {
            if j != i1 && self.stabilizers[j].anticommutes(p) {
                self.stabilizers[j].mul_assign_left(&g1);
            }
        }
        for j in 0..self.destabilizers.len() {
            if j != i1 && self.destabilizers[j].anticommutes(p) {
                self.destabilizers[j].mul_assign_left(&g1);
            }
        }
        for l in self.logical_x.iter_mut().chain(self.logical_z.iter_mut()) {
            if l.anticommutes(p) {
                l.mul_assign_left(&g1);
            }
        }
        let mut newp = p.clone();
        if outcome < 0 {
            newp.add_phase(2);
        }
        self.destabilizers[i1] = g1;
        self.stabilizers[i1] = newp;
    }

    /// Logical update: the first anticommuting logical becomes the
    /// destabilizer of `±p` and its partner is dropped.
    fn install_logical(&mut self, p: &PauliString, pos: usize, outcome: i8) {
        let m = self.logical_x.len();
        let (pair, is_x) = if pos < m { (pos, true) } else { (pos - m, false) };
        let l1 = if is_x { self.logical_x[pair].clone() } else { self.logical_z[pair].clone() };
        for k in 0..m {
            if k == pair {
                continue;
            }
            if self.logical_x[k].anticommutes(p) {
                self.logical_x[k].mul_assign_left(&l1);
            }
            if self.logical_z[k].anticommutes(p) {
                self.logical_z[k].mul_assign_left(&l1);
            }
        }
        for d in self.destabilizers.iter_mut() {
            if d.anticommutes(p) {
                d.mul_assign_left(&l1);
            }
        }
        self.logical_x.remove(pair);
        self.logical_z.remove(pair);
        let mut newp = p.clone();
        if outcome < 0 {
            newp.add_phase(2);
        }
        self.stabilizers.push(newp);
        self.destabilizers.push(l1);
    }

    /// Splits `ρ_S = (I + P̄) ρ_S^P` for a `p` anticommuting with the group.
    ///
    /// Returns `P̄` (the lowest-index anticommuting generator) and the
    /// rank-`r-1` tableau whose last logical pair is `(p, P̄)`.
    pub fn decompose_stabilizer(&self, p: &PauliString) -> Result<(PauliString, StabilizerTableau), TableauError> {
        let i1 = self.first_anticommuting_stabilizer(p).ok_or(TableauError::NotAnticommuting)?;
        let pbar = self.stabilizers[i1].clone();
        let mut t = self.clone();
        for j in 0..t.stabilizers.len() {
            if j != i1 && t.stabilizers[j].anticommutes(p) {
                t.stabilizers[j].mul_assign_left(&pbar);
            }
        }
        for j in 0..t.destabilizers.len() {
            if j != i1 && t.destabilizers[j].anticommutes(p) {
                t.destabilizers[j].mul_assign_left(&pbar);
            }
        }
        for l in t.logical_x.iter_mut().chain(t.logical_z.iter_mut()) {
            if l.anticommutes(p) {
                l.mul_assign_left(&pbar);
            }
        }
        t.stabilizers.remove(i1);
        t.destabilizers.remove(i1);
        let mut lx = p.clone();
        lx.set_phase(0);
        t.logical_x.push(lx);
        t.logical_z.push(pbar.clone());
        Ok((pbar, t))
    }

    /// `tr(ρ_a ρ_b)` for two normalized stabilizer states.
    pub fn overlap_trace(&self, other: &Self) -> Result<f64, TableauError> {
        if self.n != other.n {
            return Err(TableauError::LengthMismatch(self.n, other.n));
        }
        Ok(group_overlap(self.n, &self.stabilizers, &other.stabilizers))
    }

    /// `|⟨ψ_a|ψ_b⟩|` for pure states: `2^{-(L-c)/2}` with `c` the dimension
    /// of the shared subgroup, or zero on a sign conflict.
    pub fn inner_product_magnitude(&self, other: &Self) -> Result<f64, TableauError> {
        for t in [self, other] {
            if !t.is_pure() {
                return Err(TableauError::MixedState { rank: t.rank(), n: t.n });
            }
        }
        Ok(libm::sqrt(self.overlap_trace(other)?))
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), TableauError> {
        let n = self.n;
        let r = self.stabilizers.len();
        let bad = |m: String| Err(TableauError::Invalid(m));
        if self.destabilizers.len() != r {
            return bad(format!("{} destabilizers for rank {r}", self.destabilizers.len()));
        }
        if self.logical_x.len() != n - r || self.logical_z.len() != n - r {
            return bad(format!("logical counts {}/{} for rank {r}", self.logical_x.len(), self.logical_z.len()));
        }
        let all = self
            .stabilizers
            .iter()
            .chain(&self.destabilizers)
            .chain(&self.logical_x)
            .chain(&self.logical_z);
        for p in all {
            if p.n_qubits() != n {
                return bad(format!("row {p} has wrong length"));
            }
        }
        for (i, g) in self.stabilizers.iter().enumerate() {
            if !g.is_hermitian() {
                return bad(format!("stabilizer {i} not Hermitian"));
            }
            for (j, h) in self.stabilizers.iter().enumerate() {
                if g.anticommutes(h) {
                    return bad(format!("stabilizers {i},{j} anticommute"));
                }
            }
            for (j, d) in self.destabilizers.iter().enumerate() {
                if g.anticommutes(d) != (i == j) {
                    return bad(format!("stabilizer {i} / destabilizer {j} relation"));
                }
            }
        }
        for (i, d) in self.destabilizers.iter().enumerate() {
            for (j, e) in self.destabilizers.iter().enumerate() {
                if d.anticommutes(e) {
                    return bad(format!("destabilizers {i},{j} anticommute"));
                }
            }
        }
        let m = n - r;
        for a in 0..m {
            for (ka, la) in [(0, &self.logical_x[a]), (1, &self.logical_z[a])] {
                for s in self.stabilizers.iter().chain(&self.destabilizers) {
                    if la.anticommutes(s) {
                        return bad(format!("logical {a} does not commute with {s}"));
                    }
                }
                for b in 0..m {
                    for (kb, lb) in [(0, &self.logical_x[b]), (1, &self.logical_z[b])] {
                        let expect = a == b && ka != kb;
                        if la.anticommutes(lb) != expect {
                            return bad(format!("logical pair relation ({a},{ka}) vs ({b},{kb})"));
                        }
                    }
                }
            }
        }
        let rank = f2::rank(self.stabilizers.iter().map(|g| g.symplectic_words()));
        if rank != r {
            return bad(format!("stabilizers dependent: rank {rank} < {r}"));
        }
        Ok(())
    }
}

/// `tr(ρ_a ρ_b) = 2^{c-n}` when the groups generated by `a` and `b` agree in
/// sign on their `c`-dimensional intersection, else zero. Generators within
/// each list must commute and be independent.
pub fn group_overlap(n: usize, a: &[PauliString], b: &[PauliString]) -> f64 {
    // Eliminate the stacked rows, tracking which original rows were combined.
    let total = a.len() + b.len();
    let mut rows: Vec<(Vec<u64>, Vec<u64>)> = a
        .iter()
        .chain(b)
        .enumerate()
        .map(|(i, p)| {
            let mut tag = alloc::vec![0u64; total.div_ceil(64).max(1)];
            f2::set(&mut tag, i);
            (p.symplectic_words(), tag)
        })
        .collect();
    let mut basis: Vec<(usize, Vec<u64>, Vec<u64>)> = Vec::new();
    let mut common = 0usize;
    for (mut v, mut tag) in rows.drain(..) {
        for (piv, bv, bt) in &basis {
            if f2::get(&v, *piv) {
                f2::xor_into(&mut v, bv);
                f2::xor_into(&mut tag, bt);
            }
        }
        match f2::lowest_set(&v) {
            Some(p) => basis.push((p, v, tag)),
            None => {
                // Dependency: product of a-rows equals product of b-rows up to sign.
                let mut pa = PauliString::identity(n);
                let mut pb = PauliString::identity(n);
                for i in 0..total {
                    if f2::get(&tag, i) {
                        if i < a.len() {
                            pa.mul_assign_right(&a[i]);
                        } else {
                            pb.mul_assign_right(&b[i - a.len()]);
                        }
                    }
                }
                debug_assert!(pa.same_bits(&pb));
                if pa.phase() != pb.phase() {
                    return 0.0;
                }
                common += 1;
            }
        }
    }
    libm::exp2(common as f64 - n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn conj(g: CliffordGate, s: &str) -> String {
        let mut q = p(s);
        g.conjugate(&mut q);
        q.to_string()
    }

    #[test]
    fn conjugation_tables() {
        assert_eq!(conj(CliffordGate::H(0), "Z"), "+X");
        assert_eq!(conj(CliffordGate::H(0), "Y"), "-Y");
        assert_eq!(conj(CliffordGate::S(0), "X"), "+Y");
        assert_eq!(conj(CliffordGate::S(0), "Y"), "-X");
        assert_eq!(conj(CliffordGate::CZ(0, 1), "XI"), "+XZ");
        assert_eq!(conj(CliffordGate::CZ(0, 1), "XX"), "+YY");
        assert_eq!(conj(CliffordGate::CZ(0, 1), "XY"), "-YX");
        assert_eq!(conj(CliffordGate::CX(0, 1), "XI"), "+XX");
        assert_eq!(conj(CliffordGate::CX(0, 1), "IZ"), "+ZZ");
        assert_eq!(conj(CliffordGate::CX(0, 1), "YY"), "-XZ");
        assert_eq!(conj(CliffordGate::X(0), "Y"), "-Y");
        assert_eq!(conj(CliffordGate::Y(0), "Z"), "-Z");
        assert_eq!(conj(CliffordGate::Z(0), "X"), "-X");
    }

    #[test]
    fn two_qubit_index_zero_is_identity() {
        let g = CliffordGate::TwoQubit { index: 0, a: 0, b: 1 };
        for s in ["XI", "ZI", "IX", "IZ", "YY", "-iXZ"] {
            assert_eq!(conj(g, s), p(s).to_string());
        }
    }

    #[test]
    fn two_qubit_images_are_distinct_symplectic_bases() {
        let mut seen = std::collections::HashSet::new();
        for idx in 0..TWO_QUBIT_CLIFFORD_COUNT {
            let im = two_qubit_images(idx);
            assert!(local_omega(im[0].0, im[1].0));
            assert!(local_omega(im[2].0, im[3].0));
            assert!(!local_omega(im[0].0, im[2].0) && !local_omega(im[0].0, im[3].0));
            assert!(!local_omega(im[1].0, im[2].0) && !local_omega(im[1].0, im[3].0));
            assert!(seen.insert(im));
        }
        assert_eq!(seen.len(), 11_520);
    }

    #[test]
    fn stabilizer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = StabilizerTableau::zero_state(1);
        t.apply_clifford(&CliffordGate::H(0)).unwrap();
        assert_eq!(t.stabilizers()[0], p("X"));

        let mut t = StabilizerTableau::plus_state(1);
        let m = t.measure_pauli(&p("Z"), None, &mut rng).unwrap();
        assert_eq!(m.probability, 0.5);
        assert_eq!(m.case, MeasureCase::Random);
        t.validate().unwrap();

        let mut t = StabilizerTableau::zero_state(1);
        let m = t.measure_pauli(&p("Z"), None, &mut rng).unwrap();
        assert_eq!((m.outcome, m.probability), (1, 1.0));
        assert_eq!(t.measure_pauli(&p("Z"), Some(-1), &mut rng), Err(TableauError::ForcedImpossible));

        let bell = StabilizerTableau::from_parts(2, vec![p("XX"), p("ZZ")], vec![p("ZI"), p("IX")], vec![], vec![])
            .unwrap();
        let mut b2 = bell.clone();
        let m = b2.measure_pauli(&p("XX"), None, &mut rng).unwrap();
        assert_eq!((m.outcome, m.probability), (1, 1.0));
        assert_eq!(bell.membership(&p("-YY")), Membership::InGroup(1));
    }

    #[test]
    fn membership_examples() {
        let t = StabilizerTableau::zero_state(1);
        assert_eq!(t.membership(&p("Z")), Membership::InGroup(1));
        assert_eq!(t.membership(&p("-Z")), Membership::InGroup(-1));
        assert_eq!(t.membership(&p("X")), Membership::Anticommutes);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = StabilizerTableau::maximally_mixed(2);
        t.measure_pauli(&p("ZI"), Some(1), &mut rng).unwrap();
        assert_eq!(t.rank(), 1);
        t.validate().unwrap();
        assert_eq!(t.membership(&p("IZ")), Membership::CommutesOutside);
    }

    #[test]
    fn decomposition_examples() {
        let t = StabilizerTableau::zero_state(1);
        let (pbar, tp) = t.decompose_stabilizer(&p("X")).unwrap();
        assert_eq!(pbar, p("Z"));
        assert_eq!(tp.rank(), 0);
        tp.validate().unwrap();
        assert_eq!(tp.decompose_stabilizer(&p("X")), Err(TableauError::NotAnticommuting));
    }

    #[test]
    fn overlaps() {
        let zero = StabilizerTableau::zero_state(1);
        let mut one = zero.clone();
        one.apply_clifford(&CliffordGate::X(0)).unwrap();
        let plus = StabilizerTableau::plus_state(1);
        assert_eq!(zero.inner_product_magnitude(&zero).unwrap(), 1.0);
        assert_eq!(zero.inner_product_magnitude(&one).unwrap(), 0.0);
        assert!((zero.inner_product_magnitude(&plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let mixed = StabilizerTableau::maximally_mixed(1);
        assert!(matches!(zero.inner_product_magnitude(&mixed), Err(TableauError::MixedState { .. })));
    }

    #[test]
    fn two_qubit_sampling_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| sample_two_qubit_clifford(&mut rng, 0, 1)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
