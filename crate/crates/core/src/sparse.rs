//! Compressed sparse row matrices and the relaxation kernels built on them.

use crate::error::{Error, Result};
use crate::split::CfSplit;

/// Relative tolerance under which Galerkin products drop entries.
pub const GALERKIN_DROP_TOL: f64 = 1e-13;

/// Compressed sparse row matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric_hint: bool,
}

impl PartialEq for CsrMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_starts == other.row_starts
            && self.col_indices == other.col_indices
            && self.values == other.values
    }
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the structural invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_starts: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_starts.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_starts has length {}, expected {}",
                row_starts.len(),
                n_rows + 1
            )));
        }
        if row_starts[0] != 0 || row_starts[n_rows] != col_indices.len() {
            return Err(Error::InvalidMatrix("row_starts must span 0..nnz".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_starts[i], row_starts[i + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!("row_starts decreases at row {i}")));
            }
            let cols = &col_indices[lo..hi];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::InvalidMatrix(format!("column out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "columns not strictly increasing in row {i}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite value".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_starts,
            col_indices,
            values,
            symmetric_hint: false,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_starts = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_starts.push(0);
        for i in 0..n_rows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_indices.len() > row_starts[i] && *col_indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_starts.push(col_indices.len());
        }
        Self::new(n_rows, n_cols, row_starts, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_starts: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
            symmetric_hint: true,
        }
    }

    /// Builds a sparse matrix from a dense row-major array, keeping nonzeros only.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    /// Marks the matrix as symmetric after verifying it to 1e-12 relative.
    pub fn with_symmetric_hint(mut self) -> Result<Self> {
        if !self.is_symmetric(1e-12) {
            return Err(Error::InvalidMatrix("matrix is not symmetric".into()));
        }
        self.symmetric_hint = true;
        Ok(self)
    }

    pub fn symmetric_hint(&self) -> bool {
        self.symmetric_hint
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_starts[i], self.row_starts[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks `|a_ij - a_ji| <= tol * max|a|` for every stored entry.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.n_rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * scale)
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_starts: counts,
            col_indices,
            values,
            symmetric_hint: self.symmetric_hint,
        }
    }

    /// Sparse product `self * other` (Gustavson row-by-row accumulation).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: other.n_rows,
            });
        }
        let mut row_starts = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; other.n_cols];
        let mut marker = vec![usize::MAX; other.n_cols];
        let mut touched: Vec<usize> = Vec::new();
        row_starts.push(0);
        for i in 0..self.n_rows {
            touched.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a_ik) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b_kj) in ocols.iter().zip(ovals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a_ik * b_kj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_starts.push(col_indices.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_starts,
            col_indices,
            values,
            symmetric_hint: false,
        })
    }

    /// Removes entries with `|a_ij| < rel_tol * max|a|`.
    pub fn drop_small(&self, rel_tol: f64) -> Self {
        let cutoff = rel_tol * self.max_abs();
        let mut row_starts = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_starts.push(0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v.abs() >= cutoff && v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_starts.push(col_indices.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_starts,
            col_indices,
            values,
            symmetric_hint: self.symmetric_hint,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// `y = A x` without allocation.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y = A^T x` without forming the transpose.
    pub fn spmv_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    fn require_square(&self) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: self.n_cols,
            });
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Returns `A x`.
pub fn spmv(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n_cols(), x.len())?;
    let mut y = vec![0.0; a.n_rows()];
    a.spmv_into(x, &mut y);
    Ok(y)
}

/// One forward lexicographic Gauss–Seidel sweep on `A x = b`, in place.
///
/// Each row uses the freshest values of the previous rows, so the error
/// propagates with `I - L^{-1} A` where `L` is the lower triangle of `A`.
pub fn gauss_seidel_sweep(a: &CsrMatrix, x: &mut [f64], b: &[f64]) -> Result<()> {
    a.require_square()?;
    check_len(a.n_rows(), x.len())?;
    check_len(a.n_rows(), b.len())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        let mut diag = 0.0;
        let mut sum = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                sum -= v * x[j];
            }
        }
        if diag == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        x[i] = sum / diag;
    }
    Ok(())
}

/// Gauss–Seidel on the homogeneous system, visiting only fine rows.
///
/// Coarse entries of `u` are read but never written.
pub fn f_relaxation_sweep(a: &CsrMatrix, split: &CfSplit, u: &mut [f64]) -> Result<()> {
    a.require_square()?;
    check_len(a.n_rows(), split.len())?;
    check_len(a.n_rows(), u.len())?;
    for &i in split.fine() {
        let (cols, vals) = a.row(i);
        let mut diag = 0.0;
        let mut sum = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                sum -= v * u[j];
            }
        }
        if diag == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        u[i] = sum / diag;
    }
    Ok(())
}

/// Galerkin coarse operator `P^T A P`, with entries below
/// `GALERKIN_DROP_TOL * max|entry|` removed.
pub fn galerkin_product(a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    a.require_square()?;
    check_len(a.n_cols(), p.n_rows())?;
    let ap = a.matmul(p)?;
    let mut ac = p.transpose().matmul(&ap)?.drop_small(GALERKIN_DROP_TOL);
    ac.symmetric_hint = a.symmetric_hint;
    Ok(ac)
}

/// Energy norm `sqrt(x^T A x)`.
pub fn a_norm(a: &CsrMatrix, x: &[f64]) -> Result<f64> {
    let ax = spmv(a, x)?;
    let q: f64 = ax.iter().zip(x).map(|(p, q)| p * q).sum();
    if q < -1e-12 {
        return Err(Error::NotPositive(q));
    }
    Ok(q.max(0.0).sqrt())
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
