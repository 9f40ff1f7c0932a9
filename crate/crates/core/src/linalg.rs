//! Small dense and sparse matrix kernels.
//!
//! Only what the preprocessing stages and the solver need is here: sparse
//! times dense products, a handful of dense products with the shapes that
//! show up in the gradients, norms, and the positivity floor used after each
//! update. Everything is `f64` and row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::filled(n_rows, n_cols, 0.0)
    }

    pub fn filled(n_rows: usize, n_cols: usize, value: f64) -> Self {
        Self { n_rows, n_cols, values: vec![value; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::shape(
                "DenseMatrix::from_vec",
                format!("{} values for a {n_rows}x{n_cols} matrix", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite matrix entry {v}")));
        }
        Ok(Self { n_rows, n_cols, values })
    }

    /// Builds a matrix from equally long rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::shape(
                    "DenseMatrix::from_rows",
                    format!("row {i} has {} columns, expected {n_cols}", r.len()),
                ));
            }
            values.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), n_cols, values)
    }

    /// Fills a matrix from a generator closure evaluated in row-major order.
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                values.push(f(i, j));
            }
        }
        Self { n_rows, n_cols, values }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let width = self.n_cols.max(1);
        self.values.chunks_exact(width).take(self.n_rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", self.shape(), other.shape())));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != other.n_rows {
            return Err(Error::shape("t_matmul", format!("{:?}ᵀ x {:?}", self.shape(), other.shape())));
        }
        let mut out = DenseMatrix::zeros(self.n_cols, other.n_cols);
        for k in 0..self.n_rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.row_mut(i).iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_cols {
            return Err(Error::shape("matmul_t", format!("{:?} x {:?}ᵀ", self.shape(), other.shape())));
        }
        Ok(DenseMatrix::from_fn(self.n_rows, other.n_rows, |i, j| dot(self.row(i), other.row(j))))
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn hadamard(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    fn zip_with(&self, other: &DenseMatrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest absolute elementwise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Non-negative sparse matrix in canonical row-grouped coordinate form.
///
/// Entries are stored grouped by row with ascending column inside each row,
/// so row slices are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    // u32 keeps the index stream small; products over X are bandwidth bound
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], cols: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).map(|j| j as u32).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Values must be finite and non-negative, indices in bounds, and each
    /// position may appear at most once. Explicit zeros are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        check_width(n_cols)?;
        for &(i, j, v) in &entries {
            if i >= n_rows || j >= n_cols {
                return Err(Error::shape(
                    "SparseMatrix::from_triplets",
                    format!("entry ({i}, {j}) outside {n_rows}x{n_cols}"),
                ));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!(
                    "sparse entry ({i}, {j}) = {v} is not a finite non-negative value"
                )));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Argument(format!("duplicate sparse entry ({}, {})", w[0].0, w[0].1)));
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            if v == 0.0 {
                continue;
            }
            row_ptr[i + 1] += 1;
            cols.push(j as u32);
            values.push(v);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, cols, values })
    }

    /// Builds a matrix row by row from already-sorted `(col, value)` lists.
    pub(crate) fn from_sorted_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        assert!(check_width(n_cols).is_ok(), "{n_cols} columns exceed the index width");
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                debug_assert!(j < n_cols && v > 0.0);
                debug_assert!(cols.len() == *row_ptr.last().unwrap() || (*cols.last().unwrap() as usize) < j);
                cols.push(j as u32);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n_rows, n_cols, row_ptr, cols, values }
    }

    pub fn from_dense(d: &DenseMatrix) -> Result<Self> {
        check_width(d.n_cols())?;
        let mut row_ptr = Vec::with_capacity(d.n_rows() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.n_rows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Argument(format!(
                        "sparse entry ({i}, {j}) = {v} is not a finite non-negative value"
                    )));
                }
                cols.push(j as u32);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n_rows: d.n_rows(), n_cols: d.n_cols(), row_ptr, cols, values })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, ascending by column.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        u32::try_from(j).ok().and_then(|j| cols.binary_search(&j).ok()).map_or(0.0, |p| vals[p])
    }

    /// All stored entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j as usize, v))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d.set(i, j, v);
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for (i, j, v) in self.iter() {
            rows[j].push((i, v));
        }
        SparseMatrix::from_sorted_rows(self.n_rows, rows)
    }
}

fn check_width(n_cols: usize) -> Result<()> {
    if u32::try_from(n_cols).is_err() {
        return Err(Error::Argument(format!("{n_cols} columns exceed the sparse index width")));
    }
    Ok(())
}

/// Sparse-dense product `a · b`.
pub fn spmm(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::shape("spmm", format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        let out_row = out.row_mut(i);
        for (&k, &v) in cols.iter().zip(vals) {
            for (o, &x) in out_row.iter_mut().zip(b.row(k as usize)) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// `Aᵀ B` without forming the transpose: each row of `A` scatters into the
/// output rows named by its column indices.
pub fn spmm_t(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_rows() != b.n_rows() {
        return Err(Error::shape("spmm_t", format!("{:?}ᵀ x {:?}", a.shape(), b.shape())));
    }
    let mut out = DenseMatrix::zeros(a.n_cols(), b.n_cols());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        let b_row = b.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.row_mut(k as usize).iter_mut().zip(b_row) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// Sparse-sparse product materialized dense.
pub fn spsp_dense(a: &SparseMatrix, b: &SparseMatrix) -> Result<DenseMatrix> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::shape("spsp_dense", format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        let (a_cols, a_vals) = a.row(i);
        let out_row = out.row_mut(i);
        for (&k, &av) in a_cols.iter().zip(a_vals) {
            let (b_cols, b_vals) = b.row(k as usize);
            for (&j, &bv) in b_cols.iter().zip(b_vals) {
                out_row[j as usize] += av * bv;
            }
        }
    }
    Ok(out)
}

/// Squared Frobenius norm.
pub fn frobenius_sq(a: &DenseMatrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum()
}

/// Entrywise L1 norm.
pub fn l1_norm(a: &DenseMatrix) -> f64 {
    a.as_slice().iter().map(|v| v.abs()).sum()
}

pub fn row_sums(a: &SparseMatrix) -> Vec<f64> {
    (0..a.n_rows()).map(|i| a.row(i).1.iter().sum()).collect()
}

/// Replaces every entry below `floor` (negatives included) with `floor`.
pub fn clip_floor(a: &DenseMatrix, floor: f64) -> DenseMatrix {
    a.map(|v| if v < floor { floor } else { v })
}

pub(crate) fn clip_floor_in_place(a: &mut DenseMatrix, floor: f64) {
    for v in a.as_mut_slice() {
        if *v < floor {
            *v = floor;
        }
    }
}
