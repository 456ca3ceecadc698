//! Local-Clifford reduction of pure stabilizer states to graph states, and
//! cluster statistics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use crate::pauli::PauliString;
use crate::tableau::{CliffordGate, Membership, StabilizerTableau};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("state is mixed (rank {0} < {1})")]
    MixedState(usize, usize),
    #[error("reduction failed verification: {0}")]
    NonStabilizer(String),
}

/// Simple undirected graph on `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<bool>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![vec![false; n]; n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b, "self-loops are not allowed");
        self.adj[a][b] = true;
        self.adj[b][a] = true;
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a][b]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().enumerate().filter(|(_, &e)| e).map(|(u, _)| u)
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.adj[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// `n` on the first line, then one `a b` edge per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.n);
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    /// Stabilizer generators `X_i ∏_{j ∈ N(i)} Z_j`.
    pub fn stabilizers(&self) -> Vec<PauliString> {
        (0..self.n)
            .map(|i| {
                let mut p = PauliString::identity(self.n);
                p.set_x(i, true);
                for j in self.neighbors(i) {
                    p.set_z(j, true);
                }
                p
            })
            .collect()
    }
}

/// Reduces a pure tableau to graph form. Returns the graph and the local
/// Cliffords `C` (in application order) with `C ρ C† = |G⟩⟨G|`.
pub fn to_graph_state(t: &StabilizerTableau) -> Result<(Graph, Vec<CliffordGate>), GraphError> {
    let n = t.n_qubits();
    if !t.is_pure() {
        return Err(GraphError::MixedState(t.rank(), n));
    }
    let mut rows: Vec<PauliString> = t.stabilizers().to_vec();
    let mut local: Vec<CliffordGate> = Vec::new();

    // X-block elimination with lowest-row pivots.
    let mut pivot_col: Vec<Option<usize>> = vec![None; n];
    let mut r = 0;
    for c in 0..n {
        let Some(k) = (r..n).find(|&k| rows[k].x_bit(c)) else { continue };
        rows.swap(r, k);
        eliminate(&mut rows, r, |p| p.x_bit(c));
        pivot_col[r] = Some(c);
        r += 1;
    }
    // Remaining rows are Z-only and full rank on the non-pivot columns.
    let used: Vec<bool> = {
        let mut u = vec![false; n];
        for c in pivot_col.iter().flatten() {
            u[*c] = true;
        }
        u
    };
    let mut hadamard_cols = Vec::new();
    let mut rz = r;
    for c in 0..n {
        if used[c] {
            continue;
        }
        let Some(k) = (rz..n).find(|&k| rows[k].z_bit(c)) else { continue };
        rows.swap(rz, k);
        let (head, tail) = rows.split_at_mut(rz + 1);
        let piv = &head[rz];
        for row in tail.iter_mut() {
            if row.z_bit(c) {
                row.mul_assign_right(piv);
            }
        }
        hadamard_cols.push(c);
        rz += 1;
    }
    if rz != n {
        return Err(GraphError::NonStabilizer(String::from("X block cannot be made full rank")));
    }
    for &c in &hadamard_cols {
        let g = CliffordGate::H(c);
        local.push(g);
        for row in rows.iter_mut() {
            g.conjugate(row);
        }
    }
    // Gauss-Jordan on the now full-rank X block; row i gets x = e_i.
    for c in 0..n {
        let k = (c..n).find(|&k| rows[k].x_bit(c)).ok_or_else(|| {
            GraphError::NonStabilizer(String::from("singular X block after Hadamards"))
        })?;
        rows.swap(c, k);
        eliminate(&mut rows, c, |p| p.x_bit(c));
    }
    // Clear Y on the diagonal, then fix signs.
    for i in 0..n {
        if rows[i].z_bit(i) {
            apply_local(&mut rows, &mut local, CliffordGate::S(i));
        }
    }
    for i in 0..n {
        if rows[i].phase() == 2 {
            apply_local(&mut rows, &mut local, CliffordGate::Z(i));
        }
    }
    let mut graph = Graph::empty(n);
    for i in 0..n {
        for j in 0..n {
            let z = rows[i].z_bit(j);
            if z != rows[j].z_bit(i) {
                return Err(GraphError::NonStabilizer(String::from("Z block not symmetric")));
            }
            if z && i < j {
                graph.add_edge(i, j);
            }
        }
        if rows[i].phase() != 0 {
            return Err(GraphError::NonStabilizer(String::from("generator phase not cleared")));
        }
    }
    verify(t, &graph, &local)?;
    Ok((graph, local))
}

fn eliminate(rows: &mut [PauliString], pivot: usize, has: impl Fn(&PauliString) -> bool) {
    let piv = rows[pivot].clone();
    for (k, row) in rows.iter_mut().enumerate() {
        if k != pivot && has(row) {
            row.mul_assign_right(&piv);
        }
    }
}

fn apply_local(rows: &mut [PauliString], local: &mut Vec<CliffordGate>, g: CliffordGate) {
    for row in rows.iter_mut() {
        g.conjugate(row);
    }
    local.push(g);
}

/// Every canonical generator must be a `+1` stabilizer of the transformed state.
fn verify(t: &StabilizerTableau, graph: &Graph, local: &[CliffordGate]) -> Result<(), GraphError> {
    let mut tt = t.clone();
    for g in local {
        tt.apply_clifford(g).map_err(|e| GraphError::NonStabilizer(alloc::format!("{e}")))?;
    }
    for (i, g) in graph.stabilizers().iter().enumerate() {
        if tt.membership(g) != Membership::InGroup(1) {
            return Err(GraphError::NonStabilizer(alloc::format!("generator {i} not stabilizing")));
        }
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Connected components, each sorted, ordered by smallest vertex.
pub fn clusters(g: &Graph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(g.n);
    for (a, b) in g.edges() {
        uf.union(a, b);
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); g.n];
    for v in 0..g.n {
        let r = uf.find(v);
        by_root[r].push(v);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Size of the largest cluster (0 for an empty partition).
pub fn n_max(partition: &[Vec<usize>]) -> usize {
    partition.iter().map(|c| c.len()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plus_state_is_empty_graph() {
        let (g, lc) = to_graph_state(&StabilizerTableau::plus_state(5)).unwrap();
        assert!(g.edges().is_empty());
        assert!(lc.is_empty());
        assert_eq!(n_max(&clusters(&g)), 1);
    }

    #[test]
    fn cz_chain_is_path() {
        let n = 6;
        let mut t = StabilizerTableau::plus_state(n);
        for q in 0..n - 1 {
            t.apply_clifford(&CliffordGate::CZ(q, q + 1)).unwrap();
        }
        let (g, _) = to_graph_state(&t).unwrap();
        assert_eq!(g.edges(), (0..n - 1).map(|q| (q, q + 1)).collect::<Vec<_>>());
        assert_eq!(n_max(&clusters(&g)), n);
    }

    #[test]
    fn zero_state_needs_hadamards() {
        let (g, lc) = to_graph_state(&StabilizerTableau::zero_state(3)).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(lc, vec![CliffordGate::H(0), CliffordGate::H(1), CliffordGate::H(2)]);
    }

    #[test]
    fn two_triangles() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        assert_eq!(n_max(&clusters(&g)), 3);
        assert_eq!(clusters(&g).len(), 2);
    }

    #[test]
    fn random_clifford_states_reduce() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 10;
            let mut t = StabilizerTableau::zero_state(n);
            for _ in 0..60 {
                let a = rng.gen_range(0..n);
                let b = (a + rng.gen_range(1..n)) % n;
                let g = crate::tableau::sample_two_qubit_clifford(&mut rng, a, b);
                t.apply_clifford(&g).unwrap();
            }
            to_graph_state(&t).unwrap();
        }
    }
}
