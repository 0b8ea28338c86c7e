//! Row-oriented matrix storage shared by every solver in the crate.
//!
//! A [`Matrix`] is either dense row-major or compressed sparse row (CSR).
//! Sparse matrices also carry a column-major index of the same entries so
//! that a column of `A Aᵀ` (needed for incremental residual updates and the
//! ridge operator) costs `O(Σ nnz(col j))` over the support of one row
//! instead of a full product.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyShape { rows: usize, cols: usize },
    #[error("dense data has {got} entries, expected {expected}")]
    DenseLength { expected: usize, got: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),
    #[error("entry ({row}, {col}) lies outside a {rows}x{cols} matrix")]
    EntryOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("row {0} has zero 2-norm")]
    ZeroNormRow(usize),
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Borrowed view of one matrix row.
#[derive(Debug, Clone, Copy)]
pub enum RowView<'a> {
    Dense(&'a [f64]),
    Sparse { cols: &'a [usize], vals: &'a [f64] },
}

impl RowView<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match *self {
            RowView::Dense(row) => row.iter().zip(x).map(|(a, b)| a * b).sum(),
            RowView::Sparse { cols, vals } => {
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        let vals = match *self {
            RowView::Dense(row) => row,
            RowView::Sparse { vals, .. } => vals,
        };
        vals.iter().map(|v| v * v).sum()
    }

    /// `x += alpha * row`.
    pub fn axpy_into(&self, alpha: f64, x: &mut [f64]) {
        match *self {
            RowView::Dense(row) => {
                for (xi, a) in x.iter_mut().zip(row) {
                    *xi += alpha * a;
                }
            }
            RowView::Sparse { cols, vals } => {
                for (&j, &v) in cols.iter().zip(vals) {
                    x[j] += alpha * v;
                }
            }
        }
    }

    /// Number of structurally stored entries.
    pub fn stored(&self) -> usize {
        match *self {
            RowView::Dense(row) => row.len(),
            RowView::Sparse { cols, .. } => cols.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    // Same entries, column-major.
    col_offsets: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse(Csr),
}

/// Real `m × n` matrix, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

/// Squared row 2-norms and their sum, computed once per solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNormCache {
    norms_sq: Vec<f64>,
    frobenius_sq: f64,
}

impl RowNormCache {
    /// Cache over arbitrary positive weights (used where the denominators are
    /// not row norms of a stored matrix).
    pub(crate) fn from_norms_sq(norms_sq: Vec<f64>) -> Self {
        let frobenius_sq = norms_sq.iter().sum();
        Self {
            norms_sq,
            frobenius_sq,
        }
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norms_sq[i]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }

    pub fn len(&self) -> usize {
        self.norms_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms_sq.is_empty()
    }

    /// Population mean of the squared row norms.
    pub fn mean(&self) -> f64 {
        self.frobenius_sq / self.norms_sq.len() as f64
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<(), MatrixError> {
    if rows == 0 || cols == 0 {
        return Err(MatrixError::EmptyShape { rows, cols });
    }
    Ok(())
}

impl Matrix {
    /// Dense matrix from row-major data.
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(MatrixError::DenseLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Dense(data),
        })
    }

    /// Dense matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            if r.len() != n {
                return Err(MatrixError::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::dense(m, n, data)
    }

    pub fn identity(n: usize) -> Result<Self, MatrixError> {
        let triplets = (0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>();
        Self::from_triplets(n, n, &triplets)
    }

    /// Sparse matrix from `(row, col, value)` triplets in any order.
    /// Duplicates are summed and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, MatrixError> {
        check_shape(rows, cols)?;
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(MatrixError::EntryOutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));

        let mut offsets = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut vals = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (r, c, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == r && sorted[k].1 == c {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                offsets[r + 1] += 1;
                col_idx.push(c);
                vals.push(v);
            }
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        Self::csr(rows, cols, offsets, col_idx, vals)
    }

    /// Sparse matrix from raw CSR arrays. Column indices must be strictly
    /// increasing within each row. Explicit zeros are dropped.
    pub fn csr(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        check_shape(rows, cols)?;
        if offsets.len() != rows + 1 {
            return Err(MatrixError::InvalidCsr(format!(
                "offsets has length {}, expected {}",
                offsets.len(),
                rows + 1
            )));
        }
        if offsets[0] != 0 || offsets[rows] != col_idx.len() || col_idx.len() != vals.len() {
            return Err(MatrixError::InvalidCsr(
                "offsets must start at 0 and end at the number of stored values".into(),
            ));
        }
        for i in 0..rows {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            if lo > hi {
                return Err(MatrixError::InvalidCsr(format!("offsets decrease at row {i}")));
            }
            let row_cols = &col_idx[lo..hi];
            if let Some(&c) = row_cols.iter().find(|&&c| c >= cols) {
                return Err(MatrixError::EntryOutOfBounds {
                    row: i,
                    col: c,
                    rows,
                    cols,
                });
            }
            if row_cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(MatrixError::InvalidCsr(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
        }

        // Drop explicit zeros.
        let (offsets, col_idx, vals) = if vals.contains(&0.0) {
            let mut new_off = Vec::with_capacity(rows + 1);
            let mut new_cols = Vec::with_capacity(col_idx.len());
            let mut new_vals = Vec::with_capacity(vals.len());
            new_off.push(0);
            for i in 0..rows {
                for k in offsets[i]..offsets[i + 1] {
                    if vals[k] != 0.0 {
                        new_cols.push(col_idx[k]);
                        new_vals.push(vals[k]);
                    }
                }
                new_off.push(new_cols.len());
            }
            (new_off, new_cols, new_vals)
        } else {
            (offsets, col_idx, vals)
        };

        // Column-major companion index (counting sort by column).
        let mut col_offsets = vec![0usize; cols + 1];
        for &c in &col_idx {
            col_offsets[c + 1] += 1;
        }
        for j in 0..cols {
            col_offsets[j + 1] += col_offsets[j];
        }
        let mut next = col_offsets.clone();
        let mut col_rows = vec![0usize; col_idx.len()];
        let mut col_vals = vec![0.0; col_idx.len()];
        for i in 0..rows {
            for k in offsets[i]..offsets[i + 1] {
                let slot = next[col_idx[k]];
                col_rows[slot] = i;
                col_vals[slot] = vals[k];
                next[col_idx[k]] += 1;
            }
        }

        Ok(Self {
            rows,
            cols,
            storage: Storage::Sparse(Csr {
                offsets,
                cols: col_idx,
                vals,
                col_offsets,
                col_rows,
                col_vals,
            }),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Number of stored entries (`m·n` for dense storage).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.len(),
            Storage::Sparse(s) => s.vals.len(),
        }
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        match &self.storage {
            Storage::Dense(d) => RowView::Dense(&d[i * self.cols..(i + 1) * self.cols]),
            Storage::Sparse(s) => {
                let (lo, hi) = (s.offsets[i], s.offsets[i + 1]);
                RowView::Sparse {
                    cols: &s.cols[lo..hi],
                    vals: &s.vals[lo..hi],
                }
            }
        }
    }

    /// Iterates `(row, col, value)` over stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let entries: Box<dyn Iterator<Item = (usize, f64)>> = match self.row(i) {
                RowView::Dense(row) => Box::new(row.iter().copied().enumerate()),
                RowView::Sparse { cols, vals } => {
                    Box::new(cols.iter().copied().zip(vals.iter().copied()))
                }
            };
            entries.map(move |(j, v)| (i, j, v))
        })
    }

    /// Dense row-major copy of the entries.
    pub fn to_dense_vec(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(_) => {
                let mut out = vec![0.0; self.rows * self.cols];
                for (i, j, v) in self.triplets() {
                    out[i * self.cols + j] = v;
                }
                out
            }
        }
    }

    /// Same matrix in dense storage.
    pub fn to_dense(&self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            storage: Storage::Dense(self.to_dense_vec()),
        }
    }

    /// Same matrix in CSR storage (zeros of a dense matrix are not stored).
    pub fn to_sparse(&self) -> Matrix {
        let triplets: Vec<_> = self.triplets().filter(|t| t.2 != 0.0).collect();
        Matrix::from_triplets(self.rows, self.cols, &triplets)
            .expect("shape of an existing matrix is valid")
    }

    pub fn transpose(&self) -> Matrix {
        match &self.storage {
            Storage::Dense(d) => {
                let (m, n) = (self.rows, self.cols);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        out[j * m + i] = d[i * n + j];
                    }
                }
                Matrix {
                    rows: n,
                    cols: m,
                    storage: Storage::Dense(out),
                }
            }
            Storage::Sparse(s) => Matrix::csr(
                self.cols,
                self.rows,
                s.col_offsets.clone(),
                s.col_rows.clone(),
                s.col_vals.clone(),
            )
            .expect("column index of a valid CSR matrix is a valid CSR matrix"),
        }
    }

    fn check_row(&self, i: usize) -> Result<(), MatrixError> {
        if i >= self.rows {
            return Err(MatrixError::RowOutOfRange {
                index: i,
                rows: self.rows,
            });
        }
        Ok(())
    }

    fn check_len(expected: usize, got: usize) -> Result<(), MatrixError> {
        if expected != got {
            return Err(MatrixError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Squared row norms and Frobenius norm; fails on any zero row.
    pub fn row_norms(&self) -> Result<RowNormCache, MatrixError> {
        let norms_sq: Vec<f64> = (0..self.rows).map(|i| self.row(i).norm_sq()).collect();
        if let Some(i) = norms_sq.iter().position(|&v| v <= 0.0) {
            return Err(MatrixError::ZeroNormRow(i));
        }
        let frobenius_sq = norms_sq.iter().sum();
        Ok(RowNormCache {
            norms_sq,
            frobenius_sq,
        })
    }

    /// `A₍ᵢ₎ · x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> Result<f64, MatrixError> {
        self.check_row(i)?;
        Self::check_len(self.cols, x.len())?;
        Ok(self.row(i).dot(x))
    }

    /// `x ← x + alpha · A₍ᵢ₎ᵀ`.
    pub fn axpy_row(&self, i: usize, alpha: f64, x: &mut [f64]) -> Result<(), MatrixError> {
        self.check_row(i)?;
        Self::check_len(self.cols, x.len())?;
        self.row(i).axpy_into(alpha, x);
        Ok(())
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), MatrixError> {
        Self::check_len(self.cols, x.len())?;
        Self::check_len(self.rows, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).dot(x);
        }
        Ok(())
    }

    /// `Aᵀ y`.
    pub fn rmatvec(&self, y: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let mut out = vec![0.0; self.cols];
        self.rmatvec_into(y, &mut out)?;
        Ok(out)
    }

    pub fn rmatvec_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), MatrixError> {
        Self::check_len(self.rows, y.len())?;
        Self::check_len(self.cols, out.len())?;
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.row(i).axpy_into(yi, out);
            }
        }
        Ok(())
    }

    /// `|A| x`, the product with the elementwise absolute value of `A`.
    pub fn abs_matvec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        Self::check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| match self.row(i) {
                RowView::Dense(row) => row.iter().zip(x).map(|(a, b)| a.abs() * b).sum(),
                RowView::Sparse { cols, vals } => {
                    cols.iter().zip(vals).map(|(&j, v)| v.abs() * x[j]).sum()
                }
            })
            .collect())
    }

    /// `|A|ᵀ y`.
    pub fn abs_rmatvec(&self, y: &[f64]) -> Result<Vec<f64>, MatrixError> {
        Self::check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            match self.row(i) {
                RowView::Dense(row) => {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a.abs() * yi;
                    }
                }
                RowView::Sparse { cols, vals } => {
                    for (&j, v) in cols.iter().zip(vals) {
                        out[j] += v.abs() * yi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Column `i` of `A Aᵀ`, i.e. `A · A₍ᵢ₎ᵀ`, written into `out`.
    ///
    /// Dense storage costs one full product; sparse storage only visits the
    /// columns in the support of row `i`.
    pub fn gram_column_into(&self, i: usize, out: &mut [f64]) -> Result<(), MatrixError> {
        self.check_row(i)?;
        Self::check_len(self.rows, out.len())?;
        match &self.storage {
            Storage::Dense(_) => {
                let RowView::Dense(row) = self.row(i) else {
                    unreachable!()
                };
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.row(k).dot(row);
                }
            }
            Storage::Sparse(s) => {
                out.fill(0.0);
                for p in s.offsets[i]..s.offsets[i + 1] {
                    let (j, a_ij) = (s.cols[p], s.vals[p]);
                    for q in s.col_offsets[j]..s.col_offsets[j + 1] {
                        out[s.col_rows[q]] += s.col_vals[q] * a_ij;
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of stored entries visited by [`Self::gram_column_into`] for row `i`.
    pub fn gram_column_cost(&self, i: usize) -> usize {
        match &self.storage {
            Storage::Dense(_) => self.rows * self.cols,
            Storage::Sparse(s) => (s.offsets[i]..s.offsets[i + 1])
                .map(|p| {
                    let j = s.cols[p];
                    s.col_offsets[j + 1] - s.col_offsets[j]
                })
                .sum(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        let vals: &[f64] = match &self.storage {
            Storage::Dense(d) => d,
            Storage::Sparse(s) => &s.vals,
        };
        vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
