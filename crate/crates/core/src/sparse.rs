// SPDX-License-Identifier: Apache-2.0

//! Compressed sparse row matrices with non-negative real entries.
//!
//! A [`SparseMatrix`] is always kept in canonical form: column indices within
//! a row are strictly increasing, there are no duplicate coordinates and no
//! explicit zeros. Two matrices holding the same values are therefore equal
//! under `==`, which the tests rely on.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triples. Repeated coordinates
    /// are summed and resulting zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &t {
            if r >= rows || c >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite entry at ({r}, {c})"
                )));
            }
        }
        t.sort_by_key(|a| (a.0, a.1));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
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

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (idx, vals) = self.row(row);
        match idx.binary_search(&col) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Column indices and values of one row.
    pub fn row(&self, row: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[row]..self.indptr[row + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Entries in canonical (row-major) order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            sums[c] += v;
        }
        sums
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                let slot = next[c];
                indices[slot] = r;
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

    /// Exact sparse product `self * rhs` (Gustavson's row-by-row algorithm).
    pub fn multiply(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut pattern: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&k, &a) in idx.iter().zip(vals) {
                let (ridx, rvals) = rhs.row(k);
                for (&c, &b) in ridx.iter().zip(rvals) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                if acc[c] != 0.0 {
                    indices.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: rhs.cols,
            indptr,
            indices,
            values,
        })
    }

    /// `self * scale_self + other * scale_other`, entrywise.
    pub fn add_scaled(
        &self,
        scale_self: f64,
        other: &SparseMatrix,
        scale_other: f64,
    ) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        for r in 0..self.rows {
            let (ai, av) = self.row(r);
            let (bi, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ai.len() || j < bi.len() {
                let (c, v) = if j >= bi.len() || (i < ai.len() && ai[i] < bi[j]) {
                    i += 1;
                    (ai[i - 1], av[i - 1] * scale_self)
                } else if i >= ai.len() || bi[j] < ai[i] {
                    j += 1;
                    (bi[j - 1], bv[j - 1] * scale_other)
                } else {
                    i += 1;
                    j += 1;
                    (ai[i - 1], av[i - 1] * scale_self + bv[j - 1] * scale_other)
                };
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        })
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                idx.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `y = xᵀ * self`, i.e. a row vector times the matrix.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out[c] += xr * v;
            }
        }
        out
    }

    /// Submatrix on the given row and column index lists (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            let (idx, vals) = self.row(r);
            buf.extend(
                idx.iter()
                    .zip(vals)
                    .filter(|(&c, _)| col_map[c] != usize::MAX)
                    .map(|(&c, &v)| (col_map[c], v)),
            );
            buf.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &buf {
                indices.push(c);
                values.push(v);
            }
            buf.clear();
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .triplets()
                .all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
            && self.transpose().nnz() == self.nnz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let m = b[0].len();
        let k = b.len();
        let mut out = vec![vec![0.0; m]; n];
        for i in 0..n {
            for j in 0..m {
                for t in 0..k {
                    out[i][j] += a[i][t] * b[t][j];
                }
            }
        }
        out
    }

    #[test]
    fn triplets_are_canonicalised() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            vec![
                (1, 2, 1.0),
                (0, 1, 2.0),
                (1, 2, 3.0),
                (0, 0, 0.0),
                (1, 0, 1.0),
            ],
        )
        .unwrap();
        let t: Vec<_> = m.triplets().collect();
        assert_eq!(t, vec![(0, 1, 2.0), (1, 0, 1.0), (1, 2, 4.0)]);
    }

    #[test]
    fn cancelling_entries_are_dropped() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, -1.0), (1, 1, 2.0)])
            .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 1), 2.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn identity_times_m_is_m() {
        let m =
            SparseMatrix::from_triplets(3, 3, vec![(0, 1, 2.0), (2, 0, 5.0), (1, 1, 1.5)]).unwrap();
        let i = SparseMatrix::identity(3);
        assert_eq!(i.multiply(&m).unwrap(), m);
        assert_eq!(m.multiply(&i).unwrap(), m);
    }

    #[test]
    fn zero_annihilates() {
        let m = SparseMatrix::from_triplets(3, 3, vec![(0, 1, 2.0), (2, 0, 5.0)]).unwrap();
        let z = SparseMatrix::zeros(3, 3);
        assert_eq!(z.multiply(&m).unwrap(), z);
    }

    #[test]
    fn two_by_two_hand_product() {
        // [[1,2],[0,3]] * [[4,0],[1,5]] = [[6,10],[3,15]]
        let a =
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        let b =
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, 4.0), (1, 0, 1.0), (1, 1, 5.0)]).unwrap();
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.to_dense(), vec![vec![6.0, 10.0], vec![3.0, 15.0]]);
        assert_eq!(p.to_dense(), dense_product(&a.to_dense(), &b.to_dense()));
    }

    #[test]
    fn dimension_mismatch() {
        let a = SparseMatrix::zeros(2, 3);
        let b = SparseMatrix::zeros(2, 3);
        assert!(matches!(a.multiply(&b), Err(Error::Dimension(_))));
    }

    #[test]
    fn transpose_and_select() {
        let m =
            SparseMatrix::from_triplets(3, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.get(0, 2), 3.0);
        let s = m.select(&[2, 1], &[2, 0]);
        assert_eq!(s.to_dense(), vec![vec![0.0, 3.0], vec![2.0, 0.0]]);
    }

    #[test]
    fn vector_products() {
        let m =
            SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(m.vec_mul(&[1.0, 2.0]), vec![1.0, 6.0, 2.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = SparseMatrix> {
            proptest::collection::vec((0..rows, 0..cols, 0u8..4), 0..(rows * cols + 1)).prop_map(
                move |t| {
                    SparseMatrix::from_triplets(
                        rows,
                        cols,
                        t.into_iter().map(|(r, c, v)| (r, c, v as f64)),
                    )
                    .unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn product_matches_dense(a in matrix(4, 5), b in matrix(5, 3)) {
                let p = a.multiply(&b).unwrap();
                prop_assert_eq!(p.to_dense(), dense_product(&a.to_dense(), &b.to_dense()));
                prop_assert!(p.triplets().all(|(_, _, v)| v != 0.0));
            }

            #[test]
            fn transpose_is_involution(a in matrix(4, 6)) {
                prop_assert_eq!(a.transpose().transpose(), a);
            }
        }
    }
}
