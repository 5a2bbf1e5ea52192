//! Compressed sparse row matrices with real values and the sparse-dense product.

use rayon::prelude::*;

use super::matrix::DenseMatrix;
use super::real::Real;
use crate::error::{Error, Result};

const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn new(rows: usize, cols: usize, indptr: Vec<usize>, indices: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr.first() != Some(&0) {
            return Err(Error::dim("csr", format!("indptr length {} for {rows} rows", indptr.len())));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(Error::dim(
                "csr",
                format!("{} indices, {} values, indptr end {}", indices.len(), values.len(), indptr[rows]),
            ));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::dim("csr", "indptr is not monotone"));
        }
        if let Some(&bad) = indices.iter().find(|&&c| c >= cols) {
            return Err(Error::dim("csr", format!("column {bad} out of range for {cols} columns")));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and each
    /// row's columns end up sorted.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim("csr", format!("entry ({r},{c}) outside {rows}x{cols}")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self::new(rows, cols, indptr, indices, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| U::from_f64_lossy(v.as_f64())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                indices[slot] = i;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(i, c, out.get(i, c) + v);
            }
        }
        out
    }

    /// Sparse-dense product `self * dense`. Row `i` of the result accumulates
    /// the stored entries of row `i` in column order.
    pub fn spmm(&self, dense: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.cols != dense.rows() {
            return Err(Error::dim(
                "spmm",
                format!("sparse {}x{} vs dense {:?}", self.rows, self.cols, dense.shape()),
            ));
        }
        let m = dense.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        if m == 0 {
            return Ok(out);
        }
        let src = dense.as_slice();
        let kernel = |(i, out_row): (usize, &mut [T])| {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let d = &src[c * m..(c + 1) * m];
                for (o, &x) in out_row.iter_mut().zip(d) {
                    *o += v * x;
                }
            }
        };
        if self.nnz() * m >= PAR_THRESHOLD {
            out.as_mut_slice().par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.as_mut_slice().chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(out)
    }
}
