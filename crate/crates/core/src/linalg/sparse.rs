//! Minimal compressed-sparse-column matrices, sized for the KKT systems the
//! interior-point method factors (a few thousand rows, tens of thousands of
//! nonzeros).

/// Sparse matrix in compressed-sparse-column form with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from coordinate triplets. Duplicate entries are summed;
    /// exact zeros produced by cancellation are kept (pattern stability
    /// matters more than a few spare entries here).
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; ncols];
        for &(i, j, _) in entries {
            debug_assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            count[j] += 1;
        }
        let mut colptr = vec![0usize; ncols + 1];
        for j in 0..ncols {
            colptr[j + 1] = colptr[j] + count[j];
        }
        let nnz = colptr[ncols];
        let mut rowind = vec![0usize; nnz];
        let mut values = vec![0f64; nnz];
        let mut next = colptr.clone();
        for &(i, j, v) in entries {
            let p = next[j];
            rowind[p] = i;
            values[p] = v;
            next[j] += 1;
        }
        let mut m = CscMatrix {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        };
        m.sort_and_merge();
        m
    }

    fn sort_and_merge(&mut self) {
        let mut new_colptr = vec![0usize; self.ncols + 1];
        let mut new_rowind = Vec::with_capacity(self.rowind.len());
        let mut new_values = Vec::with_capacity(self.values.len());
        let mut col: Vec<(usize, f64)> = Vec::new();
        for j in 0..self.ncols {
            col.clear();
            for p in self.colptr[j]..self.colptr[j + 1] {
                col.push((self.rowind[p], self.values[p]));
            }
            col.sort_unstable_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < col.len() {
                let i = col[k].0;
                let mut v = col[k].1;
                k += 1;
                while k < col.len() && col[k].0 == i {
                    v += col[k].1;
                    k += 1;
                }
                new_rowind.push(i);
                new_values.push(v);
            }
            new_colptr[j + 1] = new_rowind.len();
        }
        self.colptr = new_colptr;
        self.rowind = new_rowind;
        self.values = new_values;
    }

    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    /// y += A x
    pub fn mat_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowind[p]] += self.values[p] * xj;
            }
        }
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mat_vec_acc(x, &mut y);
        y
    }

    /// y += A^T x
    pub fn t_mat_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.values[p] * x[self.rowind[p]];
            }
            y[j] += acc;
        }
    }

    pub fn t_mat_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.t_mat_vec_acc(x, &mut y);
        y
    }

    /// Iterate the nonzeros of column `j` as `(row, value)` pairs.
    pub fn col_iter(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowind[p], self.values[p]))
    }

    /// Triplet dump in column order (used by program export and rebuilds).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                out.push((self.rowind[p], j, self.values[p]));
            }
        }
        out
    }

    /// Symmetric matvec for a matrix stored as its upper triangle
    /// (diagonal included once): y = (U + U^T - diag(U)) x.
    pub fn sym_upper_mat_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(self.nrows, self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowind[p];
                let v = self.values[p];
                if i == j {
                    acc += v * xj;
                } else {
                    // strictly upper entry contributes to both halves
                    y[i] += v * xj;
                    acc += v * x[i];
                }
            }
            y[j] += acc;
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
