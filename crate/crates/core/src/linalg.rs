//! Compressed sparse rows and a banded direct solver.
//!
//! The generators produced by [`crate::grid::assemble_operator`] are banded in
//! lexicographic cell order (bandwidth 1 in one dimension, `n` in two), and
//! every matrix we factor has the form `a I - b L` with `a > 0`, `b >= 0`.
//! Such matrices are column diagonally dominant M-matrices, for which Gaussian
//! elimination without pivoting is stable and produces no fill outside the band.

use nalgebra::DMatrix;

use crate::error::{FpkError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
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

    /// Iterates `(col, value)` over the stored entries of a row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterates all stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        crate::par::map_range(self.nrows, |i| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    /// `a * I + b * self`.
    pub fn shifted_scaled(&self, a: f64, b: f64) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut triplets: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, b * v)).collect();
        triplets.extend((0..self.nrows).map(|i| (i, i, a)));
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            sums[j] += v;
        }
        sums
    }

    /// Largest `|i - j|` below and above the diagonal among stored entries.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.triplets().fold((0, 0), |(lo, up), (i, j, _)| {
            if i > j {
                (lo.max(i - j), up)
            } else {
                (lo, up.max(j - i))
            }
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Maximum entrywise difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let neg: Vec<_> = other.triplets().map(|(i, j, v)| (i, j, -v)).collect();
        let diff =
            Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(neg).collect());
        diff.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// LU factors of a banded matrix, computed without pivoting.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        assert_eq!(matrix.nrows(), matrix.ncols());
        let n = matrix.nrows();
        let (lower, upper) = matrix.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for (i, j, v) in matrix.triplets() {
            band[i * width + (j + lower - i)] = v;
        }
        let at = |i: usize, j: usize| i * width + (j + lower - i);
        for k in 0..n {
            let pivot = band[at(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(FpkError::Singular(k));
            }
            let row_end = (k + lower).min(n - 1);
            let col_end = (k + upper).min(n - 1);
            for i in k + 1..=row_end {
                let l = band[at(i, k)] / pivot;
                band[at(i, k)] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=col_end {
                    let u = band[at(k, j)];
                    band[at(i, j)] -= l * u;
                }
            }
        }
        Ok(Self {
            n,
            lower,
            upper,
            band,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let width = self.lower + self.upper + 1;
        let at = |i: usize, j: usize| i * width + (j + self.lower - i);
        for i in 0..self.n {
            let start = i.saturating_sub(self.lower);
            let mut acc = rhs[i];
            for j in start..i {
                acc -= self.band[at(i, j)] * rhs[j];
            }
            rhs[i] = acc;
        }
        for i in (0..self.n).rev() {
            let end = (i + self.upper).min(self.n - 1);
            let mut acc = rhs[i];
            for j in i + 1..=end {
                acc -= self.band[at(i, j)] * rhs[j];
            }
            rhs[i] = acc / self.band[at(i, i)];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
