//! Small dense linear algebra over F2 on packed `u64` rows.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub(crate) fn get(v: &[u64], j: usize) -> bool {
    (v[j >> 6] >> (j & 63)) & 1 == 1
}

#[inline]
pub(crate) fn set(v: &mut [u64], j: usize) {
    v[j >> 6] |= 1 << (j & 63);
}

#[inline]
pub(crate) fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

pub(crate) fn lowest_set(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

/// Incrementally maintained row basis. Each stored row has a pivot bit that
/// is cleared in every row inserted after it, so reduction in insertion order
/// is exact.
#[derive(Clone, Debug, Default)]
pub(crate) struct Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Basis {
    pub(crate) fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn reduce(&self, v: &mut [u64]) {
        for (p, r) in &self.rows {
            if get(v, *p) {
                xor_into(v, r);
            }
        }
    }

    /// Inserts `v`; returns true if it was independent of the current span.
    pub(crate) fn insert(&mut self, mut v: Vec<u64>) -> bool {
        self.reduce(&mut v);
        match lowest_set(&v) {
            Some(p) => {
                self.rows.push((p, v));
                true
            }
            None => false,
        }
    }
}

/// Rank of a list of rows.
pub(crate) fn rank(rows: impl IntoIterator<Item = Vec<u64>>) -> usize {
    let mut b = Basis::new();
    for r in rows {
        b.insert(r);
    }
    b.rank()
}

/// Solves `A s = b` over F2 where `A` has `rows.len()` rows of `n_cols` bits.
/// Returns one solution or `None` if the system is inconsistent.
pub(crate) fn solve(rows: &[Vec<u64>], rhs: &[bool], n_cols: usize) -> Option<Vec<u64>> {
    let words = n_cols.div_ceil(64);
    let mut m: Vec<(Vec<u64>, bool)> = rows.iter().cloned().zip(rhs.iter().copied()).collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..n_cols {
        let Some(k) = (r..m.len()).find(|&k| get(&m[k].0, c)) else {
            continue;
        };
        m.swap(r, k);
        let (pr, pb) = m[r].clone();
        for (k, row) in m.iter_mut().enumerate() {
            if k != r && get(&row.0, c) {
                xor_into(&mut row.0, &pr);
                row.1 ^= pb;
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    if m[r..].iter().any(|(_, b)| *b) {
        return None;
    }
    let mut s = vec![0u64; words];
    for (i, &c) in pivots.iter().enumerate() {
        if m[i].1 {
            set(&mut s, c);
        }
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_rank_and_solve() {
        let rows = vec![vec![0b011u64], vec![0b110], vec![0b101]];
        assert_eq!(rank(rows.clone()), 2);
        let s = solve(&rows[..2], &[true, false], 3).unwrap();
        let dot = |r: &Vec<u64>| (r[0] & s[0]).count_ones() & 1 == 1;
        assert!(dot(&rows[0]));
        assert!(!dot(&rows[1]));
        assert!(solve(&rows, &[true, true, true], 3).is_none());
    }
}
