//! Compressed-sparse-row storage for network weight matrices.
//!
//! Constructed networks (partition-of-unity bumps, chart assemblies) are block
//! structured and mostly zero, so layers keep only their nonzero entries.
//! Explicit zeros are never stored: `nnz` is exactly the `‖A‖₀` weight count.

use ndarray::Array2;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed;
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == j {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    col_idx.push(j);
                    values.push(acc);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let (r, c) = dense.dim();
        Self::from_triplets(
            r,
            c,
            dense
                .indexed_iter()
                .filter(|(_, v)| **v != 0.0)
                .map(|((i, j), v)| (i, j, *v)),
        )
    }

    /// Row-major nested slices, mainly for tests and literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Self::from_triplets(
            nrows,
            ncols,
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] = v;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Applies the matrix to a block of `npts` points stored neuron-major
    /// (`input[k * npts + p]` is coordinate `k` of point `p`).
    pub fn matmul_block(&self, input: &[f64], npts: usize, out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.ncols * npts);
        debug_assert_eq!(out.len(), self.nrows * npts);
        for i in 0..self.nrows {
            let dst = &mut out[i * npts..(i + 1) * npts];
            dst.fill(0.0);
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let src = &input[j * npts..(j + 1) * npts];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self * other`.
    pub fn mul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    trip.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// Stacks matrices on top of each other (equal column counts).
    pub fn vstack(parts: &[&SparseMatrix]) -> SparseMatrix {
        let ncols = parts[0].ncols;
        assert!(parts.iter().all(|p| p.ncols == ncols), "vstack column mismatch");
        let mut off = 0;
        let mut trip = Vec::new();
        for p in parts {
            trip.extend(p.triplets().map(|(i, j, v)| (i + off, j, v)));
            off += p.nrows;
        }
        Self::from_triplets(off, ncols, trip)
    }

    /// Places matrices side by side (equal row counts).
    pub fn hstack(parts: &[&SparseMatrix]) -> SparseMatrix {
        let nrows = parts[0].nrows;
        assert!(parts.iter().all(|p| p.nrows == nrows), "hstack row mismatch");
        let mut off = 0;
        let mut trip = Vec::new();
        for p in parts {
            trip.extend(p.triplets().map(|(i, j, v)| (i, j + off, v)));
            off += p.ncols;
        }
        Self::from_triplets(nrows, off, trip)
    }

    pub fn block_diag(parts: &[&SparseMatrix]) -> SparseMatrix {
        let (mut r, mut c) = (0, 0);
        let mut trip = Vec::new();
        for p in parts {
            trip.extend(p.triplets().map(|(i, j, v)| (i + r, j + c, v)));
            r += p.nrows;
            c += p.ncols;
        }
        Self::from_triplets(r, c, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
