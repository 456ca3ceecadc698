//! Phase-tracked Pauli strings in the binary symplectic representation.
//!
//! A string on `n` qubits is stored as two packed bit vectors `x` and `z`
//! plus a phase exponent `k` (mod 4). The operator is
//!
//! ```text
//! i^k * ⊗_j P(x_j, z_j),   P(0,0)=I, P(1,0)=X, P(1,1)=Y, P(0,1)=Z
//! ```
//!
//! so `Y` carries its own factor of `i` (Y = iXZ) and every Hermitian string
//! has `k ∈ {0, 2}`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Errors raised by Pauli-string operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PauliError {
    #[error("length mismatch: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("site {site} out of range for {n} qubits")]
    IndexOutOfRange { site: usize, n: usize },
    #[error("cannot parse Pauli string: {0}")]
    Parse(String),
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    /// `(x, z)` bits of the letter.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// A Pauli operator `i^phase * P_0 ⊗ ... ⊗ P_{n-1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

/// Power of `i` (mod 4) picked up by the word-wise product `(x1|z1)(x2|z2)`.
#[inline(always)]
fn product_phase(x1: u64, z1: u64, x2: u64, z2: u64) -> u32 {
    let (px1, py1, pz1) = (x1 & !z1, x1 & z1, !x1 & z1);
    let (px2, py2, pz2) = (x2 & !z2, x2 & z2, !x2 & z2);
    // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
    let plus = ((px1 & py2) | (py1 & pz2) | (pz1 & px2)).count_ones();
    let minus = ((py1 & px2) | (pz1 & py2) | (px1 & pz2)).count_ones();
    plus + 3 * minus
}

impl PauliString {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self { n, x: vec![0; w], z: vec![0; w], phase: 0 }
    }

    /// A single letter at `site`, identity elsewhere.
    pub fn single(n: usize, site: usize, letter: Letter) -> Self {
        assert!(site < n, "site {site} out of range for {n} qubits");
        let mut p = Self::identity(n);
        p.set_letter(site, letter);
        p
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (j, &l) in letters.iter().enumerate() {
            p.set_letter(j, l);
        }
        p
    }

    /// Builds a string from explicit bit vectors (one `bool` per qubit).
    pub fn from_bits(x: &[bool], z: &[bool], phase: u8) -> Self {
        assert_eq!(x.len(), z.len());
        let mut p = Self::identity(x.len());
        for j in 0..x.len() {
            p.set_x(j, x[j]);
            p.set_z(j, z[j]);
        }
        p.phase = phase & 3;
        p
    }

    /// Builds a string from packed words. Bits beyond `n` must be zero.
    pub fn from_words(n: usize, x: Vec<u64>, z: Vec<u64>, phase: u8) -> Self {
        assert_eq!(x.len(), words_for(n));
        assert_eq!(z.len(), words_for(n));
        let p = Self { n, x, z, phase: phase & 3 };
        debug_assert!(p.tail_is_clean());
        p
    }

    fn tail_is_clean(&self) -> bool {
        let r = self.n % 64;
        if r == 0 || self.x.is_empty() {
            return true;
        }
        let mask = !((1u64 << r) - 1);
        let last = self.x.len() - 1;
        self.x[last] & mask == 0 && self.z[last] & mask == 0
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    #[inline]
    pub fn set_phase(&mut self, k: u8) {
        self.phase = k & 3;
    }

    /// Multiplies the operator by `i^k`.
    #[inline]
    pub fn add_phase(&mut self, k: u8) {
        self.phase = (self.phase + k) & 3;
    }

    #[inline]
    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    #[inline]
    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    #[inline]
    pub fn x_bit(&self, j: usize) -> bool {
        (self.x[j >> 6] >> (j & 63)) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, j: usize) -> bool {
        (self.z[j >> 6] >> (j & 63)) & 1 == 1
    }

    #[inline]
    pub fn set_x(&mut self, j: usize, v: bool) {
        let m = 1u64 << (j & 63);
        if v {
            self.x[j >> 6] |= m;
        } else {
            self.x[j >> 6] &= !m;
        }
    }

    #[inline]
    pub fn set_z(&mut self, j: usize, v: bool) {
        let m = 1u64 << (j & 63);
        if v {
            self.z[j >> 6] |= m;
        } else {
            self.z[j >> 6] &= !m;
        }
    }

    #[inline]
    pub(crate) fn flip_x(&mut self, j: usize) {
        self.x[j >> 6] ^= 1u64 << (j & 63);
    }

    #[inline]
    pub(crate) fn flip_z(&mut self, j: usize) {
        self.z[j >> 6] ^= 1u64 << (j & 63);
    }

    pub fn letter(&self, j: usize) -> Letter {
        Letter::from_bits(self.x_bit(j), self.z_bit(j))
    }

    /// Overwrites the letter at `j`; the phase exponent is left untouched.
    pub fn set_letter(&mut self, j: usize, l: Letter) {
        let (x, z) = l.bits();
        self.set_x(j, x);
        self.set_z(j, z);
    }

    /// True when the string has no non-identity letter (any phase).
    pub fn is_identity_bits(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// Hermitian strings have phase 0 or 2.
    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    /// `+1` for phase 0, `-1` for phase 2. Panics on non-Hermitian strings.
    pub fn sign(&self) -> i8 {
        match self.phase {
            0 => 1,
            2 => -1,
            k => panic!("sign requested for non-Hermitian phase i^{k}"),
        }
    }

    /// Parity of the number of `Y` letters: `P* = (-1)^{#Y} P` for Hermitian `P`.
    pub fn y_parity(&self) -> bool {
        let c: u32 = self.x.iter().zip(&self.z).map(|(a, b)| (a & b).count_ones()).sum();
        c & 1 == 1
    }

    fn check_len(&self, other: &Self) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::LengthMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// `⊕_j (z_aj x_bj ⊕ x_aj z_bj)`: 1 iff the operators anticommute.
    pub fn symplectic_product(&self, other: &Self) -> Result<u8, PauliError> {
        self.check_len(other)?;
        Ok(self.anticommutes(other) as u8)
    }

    /// Unchecked symplectic product.
    #[inline]
    pub fn anticommutes(&self, other: &Self) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0u64;
        for (((x1, z1), x2), z2) in self.x.iter().zip(&self.z).zip(&other.x).zip(&other.z) {
            acc ^= (x1 & z2) ^ (z1 & x2);
        }
        acc.count_ones() & 1 == 1
    }

    #[inline]
    pub fn commutes(&self, other: &Self) -> bool {
        !self.anticommutes(other)
    }

    /// Exact product `self · other`.
    pub fn multiply(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.mul_assign_right(other);
        Ok(out)
    }

    /// `self ← self · other` with exact phase.
    pub fn mul_assign_right(&mut self, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        let mut k = self.phase as u32 + other.phase as u32;
        for (((x1, z1), &x2), &z2) in self.x.iter_mut().zip(self.z.iter_mut()).zip(&other.x).zip(&other.z) {
            k += product_phase(*x1, *z1, x2, z2);
            *x1 ^= x2;
            *z1 ^= z2;
        }
        self.phase = (k & 3) as u8;
    }

    /// `self ← other · self` with exact phase.
    pub fn mul_assign_left(&mut self, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        let mut k = self.phase as u32 + other.phase as u32;
        for (((x2, z2), &x1), &z1) in self.x.iter_mut().zip(self.z.iter_mut()).zip(&other.x).zip(&other.z) {
            k += product_phase(x1, z1, *x2, *z2);
            *x2 ^= x1;
            *z2 ^= z1;
        }
        self.phase = (k & 3) as u8;
    }

    /// Copy with the letter at `site` replaced; phase unchanged.
    pub fn substitute_site(&self, site: usize, letter: Letter) -> Result<Self, PauliError> {
        if site >= self.n {
            return Err(PauliError::IndexOutOfRange { site, n: self.n });
        }
        let mut out = self.clone();
        out.set_letter(site, letter);
        Ok(out)
    }

    /// Bitwise XOR of the `(x|z)` vectors; the phase of the result is zero.
    pub fn xor_bits(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        Self { n: self.n, x, z, phase: 0 }
    }

    /// Same bits as `other`, ignoring the phase.
    pub fn same_bits(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    /// Canonical ordering key on the bit content (phase ignored).
    pub fn cmp_bits(&self, other: &Self) -> Ordering {
        self.x.cmp(&other.x).then_with(|| self.z.cmp(&other.z))
    }

    /// Restriction to a subset of sites, in the given order. The phase is
    /// kept, which is exact only when the dropped sites carry identity.
    pub fn restrict(&self, sites: &[usize]) -> Self {
        let mut out = Self::identity(sites.len());
        for (k, &j) in sites.iter().enumerate() {
            out.set_x(k, self.x_bit(j));
            out.set_z(k, self.z_bit(j));
        }
        out.phase = self.phase;
        out
    }

    /// Iterator over non-identity sites.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.x_bit(j) || self.z_bit(j))
    }

    /// Interleaved `2n`-bit vector `(x_0..x_{n-1}, z_0..z_{n-1})` packed in words.
    pub fn symplectic_words(&self) -> Vec<u64> {
        let mut v = vec![0u64; words_for(2 * self.n)];
        for j in 0..self.n {
            if self.x_bit(j) {
                v[j >> 6] |= 1 << (j & 63);
            }
            if self.z_bit(j) {
                let k = self.n + j;
                v[k >> 6] |= 1 << (k & 63);
            }
        }
        v
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for j in 0..self.n {
            write!(f, "{}", self.letter(j).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    /// Grammar: `[+|-][i]{I,X,Y,Z}+`. Site 0 is the first letter.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut phase = 0u8;
        let mut rest = s;
        if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            phase += 1;
            rest = r;
        }
        if rest.is_empty() {
            return Err(PauliError::Parse(s.into()));
        }
        let mut letters = Vec::with_capacity(rest.len());
        for c in rest.chars() {
            letters.push(match c {
                'I' | '_' => Letter::I,
                'X' => Letter::X,
                'Y' => Letter::Y,
                'Z' => Letter::Z,
                _ => return Err(PauliError::Parse(s.into())),
            });
        }
        let mut p = Self::from_letters(&letters);
        p.phase = phase & 3;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn symplectic_examples() {
        assert_eq!(p("XI").symplectic_product(&p("ZI")).unwrap(), 1);
        assert_eq!(p("II").symplectic_product(&p("XY")).unwrap(), 0);
        assert_eq!(p("YZ").symplectic_product(&p("XX")).unwrap(), 0);
        assert!(p("X").symplectic_product(&p("XX")).is_err());
    }

    #[test]
    fn multiply_examples() {
        let xz = p("X").multiply(&p("Z")).unwrap();
        assert_eq!(xz.to_string(), "-iY");
        assert_eq!(xz.phase(), 3);
        assert_eq!(p("X").multiply(&p("X")).unwrap().to_string(), "+I");
        assert_eq!(p("XZ").multiply(&p("ZZ")).unwrap().to_string(), "-iYI");
        assert_eq!(p("Y").multiply(&p("Z")).unwrap().to_string(), "+iX");
    }

    #[test]
    fn substitute_examples() {
        assert_eq!(p("XX").substitute_site(1, Letter::Y).unwrap(), p("XY"));
        assert_eq!(p("II").substitute_site(0, Letter::Z).unwrap(), p("ZI"));
        assert_eq!(p("-YZ").substitute_site(0, Letter::I).unwrap(), p("-IZ"));
        assert!(p("XX").substitute_site(2, Letter::Y).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["+XYZI", "-iZZ", "+iI", "-X"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert_eq!(p("XY").to_string(), "+XY");
        assert!("".parse::<PauliString>().is_err());
        assert!("+iQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn wide_strings_cross_word_boundary() {
        let mut a = PauliString::identity(130);
        let mut b = PauliString::identity(130);
        a.set_letter(0, Letter::X);
        a.set_letter(129, Letter::Y);
        b.set_letter(129, Letter::Z);
        assert!(a.anticommutes(&b));
        let c = a.multiply(&b).unwrap();
        assert_eq!(c.letter(129), Letter::X);
        assert_eq!(c.phase(), 1);
        assert_eq!(c.weight(), 2);
    }
}
