//! Sparse LDL^T factorization for the quasidefinite KKT systems solved at
//! every interior-point iteration, plus a greedy minimum-degree ordering.
//!
//! The factorization is the classic up-looking algorithm (elimination tree,
//! per-row pattern by path compression, sparse triangular solve per row).
//! No pivoting: the caller regularizes the KKT matrix so that plain LDL^T
//! exists for any symmetric permutation.

use super::sparse::CscMatrix;
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

const NONE: usize = usize::MAX;

/// Greedy minimum-degree ordering of a symmetric sparsity pattern given by
/// undirected edges (i, j), i != j. Returns `perm` with `perm[k]` = the node
/// eliminated k-th. Nodes whose degree explodes during elimination are
/// deferred to the end; they form the dense core of the factor.
pub fn min_degree_order(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let avg_deg = if n > 0 { edges.len() * 2 / n.max(1) } else { 0 };
    let dense_cap = (4 * avg_deg + 64).min(n);

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::with_capacity(n);
    for (v, nb) in adj.iter().enumerate() {
        heap.push(Reverse((nb.len().min(dense_cap), v)));
    }
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] {
            continue;
        }
        let cur = adj[v].len().min(dense_cap);
        if cur != deg {
            heap.push(Reverse((cur, v)));
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let neighbors: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &neighbors {
            adj[u].remove(&v);
        }
        // connect the neighbors pairwise (elimination clique)
        for (a_idx, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[a_idx + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &u in &neighbors {
            heap.push(Reverse((adj[u].len().min(dense_cap), u)));
        }
        adj[v].clear();
    }
    perm
}

#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    pub n: usize,
    parent: Vec<usize>,
    lp: Vec<usize>,
    lnz: usize,
}

/// Elimination-tree based symbolic analysis. `upper` must hold the upper
/// triangle (diagonal included) of the matrix with sorted row indices.
pub fn ldl_symbolic(upper: &CscMatrix) -> LdlSymbolic {
    let n = upper.ncols;
    let mut parent = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz_col = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for p in upper.colptr[k]..upper.colptr[k + 1] {
            let mut i = upper.rowind[p];
            if i >= k {
                continue;
            }
            while flag[i] != k {
                if parent[i] == NONE {
                    parent[i] = k;
                }
                lnz_col[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + lnz_col[k];
    }
    let lnz = lp[n];
    LdlSymbolic { n, parent, lp, lnz }
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    pub d: Vec<f64>,
    // workspaces reused across refactorizations
    y: Vec<f64>,
    pattern: Vec<usize>,
    flag: Vec<usize>,
    next: Vec<usize>,
}

#[derive(Debug, thiserror::Error)]
#[error("zero pivot at column {col} during LDL factorization")]
pub struct ZeroPivot {
    pub col: usize,
}

impl LdlFactor {
    pub fn new(sym: &LdlSymbolic) -> Self {
        LdlFactor {
            n: sym.n,
            lp: sym.lp.clone(),
            li: vec![0; sym.lnz],
            lx: vec![0.0; sym.lnz],
            d: vec![0.0; sym.n],
            y: vec![0.0; sym.n],
            pattern: vec![0; sym.n],
            flag: vec![NONE; sym.n],
            next: vec![0; sym.n],
        }
    }

    /// Numeric factorization of `upper` (same pattern as the symbolic pass).
    pub fn factor(&mut self, upper: &CscMatrix, sym: &LdlSymbolic) -> Result<(), ZeroPivot> {
        let n = self.n;
        debug_assert_eq!(upper.ncols, n);
        self.next.copy_from_slice(&sym.lp[..n]);
        for k in 0..n {
            let mut top = n;
            self.flag[k] = k;
            self.d[k] = 0.0;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let i = upper.rowind[p];
                if i > k {
                    continue;
                }
                if i == k {
                    self.d[k] += upper.values[p];
                    continue;
                }
                self.y[i] += upper.values[p];
                let mut len = 0usize;
                let mut ii = i;
                while self.flag[ii] != k {
                    self.pattern[len] = ii;
                    len += 1;
                    self.flag[ii] = k;
                    ii = sym.parent[ii];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    self.pattern[top] = self.pattern[len];
                }
            }
            // sparse triangular solve along the pattern, in topological order
            for t in top..n {
                let i = self.pattern[t];
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p_end = self.next[i];
                for p in self.lp[i]..p_end {
                    self.y[self.li[p]] -= self.lx[p] * yi;
                }
                let lki = yi / self.d[i];
                self.d[k] -= lki * yi;
                self.li[p_end] = k;
                self.lx[p_end] = lki;
                self.next[i] += 1;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(ZeroPivot { col: k });
            }
        }
        Ok(())
    }

    /// In-place solve of L D L^T x = b.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
    }
}
