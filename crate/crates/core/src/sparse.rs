//! Compressed sparse row matrices and the adjacency constructions built on them.

use crate::matrix::Matrix;
use crate::{Error, Result};

/// A CSR matrix with strictly increasing column indices per row and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    num_rows: usize,
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles a matrix from raw CSR arrays, checking every structural invariant.
    pub fn from_parts(
        num_rows: usize,
        num_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != num_rows + 1 {
            return Err(Error::input(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                num_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::input("row_offsets must start at 0 and end at nnz"));
        }
        if col_indices.len() != values.len() {
            return Err(Error::input("col_indices and values differ in length"));
        }
        for (r, w) in row_offsets.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(Error::input(format!("row_offsets decrease at row {r}")));
            }
            let cols = &col_indices[w[0]..w[1]];
            if cols.iter().any(|&c| c >= num_cols) {
                return Err(Error::input(format!(
                    "column index out of range in row {r}"
                )));
            }
            if cols.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::input(format!(
                    "columns not strictly increasing in row {r}"
                )));
            }
        }
        if values.contains(&0.0) {
            return Err(Error::input("explicit zero stored in sparse matrix"));
        }
        Ok(Self {
            num_rows,
            num_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(dense: &Matrix) -> Self {
        let mut row_offsets = Vec::with_capacity(dense.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            num_rows: dense.rows(),
            num_cols: dense.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs stored in row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.num_rows, self.num_cols);
        for i in 0..self.num_rows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.num_rows == self.num_cols
            && (0..self.num_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Rebuilds the matrix with `f(row, position_in_values, value)` applied to
    /// every stored entry, dropping entries that map to zero.
    pub fn filter_map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.num_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.num_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = f(i, k, self.values[k]);
                if v != 0.0 {
                    col_indices.push(self.col_indices[k]);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse-dense product `self · dense`.
    pub fn spmm(&self, dense: &Matrix) -> Result<Matrix> {
        if self.num_cols != dense.rows() {
            return Err(Error::Shape {
                op: "spmm",
                lhs: (self.num_rows, self.num_cols),
                rhs: dense.shape(),
            });
        }
        let cols = dense.cols();
        let mut out = Matrix::zeros(self.num_rows, cols);
        for i in 0..self.num_rows {
            let out_row = out.row_mut(i);
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = self.values[k];
                for (o, &h) in out_row.iter_mut().zip(dense.row(self.col_indices[k])) {
                    *o += v * h;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense` by scattering rows; no transpose is materialized.
    pub fn spmm_transpose(&self, dense: &Matrix) -> Result<Matrix> {
        if self.num_rows != dense.rows() {
            return Err(Error::Shape {
                op: "spmm_transpose",
                lhs: (self.num_cols, self.num_rows),
                rhs: dense.shape(),
            });
        }
        let cols = dense.cols();
        let mut out = Matrix::zeros(self.num_cols, cols);
        for i in 0..self.num_rows {
            let g_row = dense.row(i);
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = self.values[k];
                for (o, &g) in out.row_mut(self.col_indices[k]).iter_mut().zip(g_row) {
                    *o += v * g;
                }
            }
        }
        Ok(out)
    }

    /// Applies a permutation to rows and columns: entry `(i, j)` moves to
    /// `(perm[i], perm[j])`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<SparseMatrix> {
        if self.num_rows != self.num_cols || perm.len() != self.num_rows {
            return Err(Error::input("permutation must match a square matrix"));
        }
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for i in 0..self.num_rows {
            for (j, v) in self.row(i) {
                triplets.push((perm[i], perm[j], v));
            }
        }
        Ok(Self::from_sorted_triplets(
            self.num_rows,
            self.num_cols,
            triplets,
        ))
    }

    fn from_sorted_triplets(
        num_rows: usize,
        num_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> SparseMatrix {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0; num_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for i in 0..num_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseMatrix {
            num_rows,
            num_cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

/// Builds the binary symmetric adjacency matrix of an undirected graph.
///
/// Duplicate edges and both orientations collapse to one entry per direction;
/// self-loops are discarded since normalization adds them back.
pub fn build_csr(edges: &[(usize, usize)], n: usize) -> Result<SparseMatrix> {
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::input(format!(
                "edge ({i}, {j}) has an endpoint outside [0, {n})"
            )));
        }
        if i == j {
            continue;
        }
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    for mut row in neighbors {
        row.sort_unstable();
        row.dedup();
        col_indices.extend(row);
        row_offsets.push(col_indices.len());
    }
    let values = vec![1.0; col_indices.len()];
    Ok(SparseMatrix {
        num_rows: n,
        num_cols: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// `D^{-1/2} (A + I) D^{-1/2}` where `D` is the degree matrix of `A + I`.
///
/// `adjacency` must be binary, symmetric and loop-free.
pub fn normalize_adjacency(adjacency: &SparseMatrix) -> SparseMatrix {
    let n = adjacency.num_rows;
    let degree: Vec<f64> = (0..n).map(|i| (adjacency.row_nnz(i) + 1) as f64).collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(adjacency.nnz() + n);
    let mut values = Vec::with_capacity(adjacency.nnz() + n);
    row_offsets.push(0);
    for i in 0..n {
        let mut diagonal_done = false;
        for (j, _) in adjacency.row(i) {
            if !diagonal_done && j > i {
                col_indices.push(i);
                values.push(1.0 / degree[i]);
                diagonal_done = true;
            }
            col_indices.push(j);
            // the product commutes exactly, so (i, j) and (j, i) get identical bits
            values.push(1.0 / (degree[i] * degree[j]).sqrt());
        }
        if !diagonal_done {
            col_indices.push(i);
            values.push(1.0 / degree[i]);
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix {
        num_rows: n,
        num_cols: n,
        row_offsets,
        col_indices,
        values,
    }
}
