//! Cholesky factorizations: a dense one with diagonal jitter for conditioning,
//! and a diagonally pivoted, possibly low-rank one for sampling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `L L^T = A + jitter I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

/// Why a plain Cholesky factorization stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonPositivePivot {
    pub index: usize,
    pub pivot: f64,
}

/// Right-looking Cholesky of `a + jitter I`; fails on the first pivot that is
/// not strictly positive.
pub fn cholesky(a: &DMatrix<f64>, jitter: f64) -> std::result::Result<CholeskyFactor, NonPositivePivot> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(NonPositivePivot { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor { l, jitter })
}

/// Factorizes `a + jitter I`, escalating a positive jitter tenfold until
/// `max_jitter` is exceeded. A zero jitter is tried once.
pub fn jittered_cholesky(a: &DMatrix<f64>, jitter: f64, max_jitter: f64) -> Result<CholeskyFactor> {
    let mut j = jitter;
    loop {
        match cholesky(a, j) {
            Ok(f) => return Ok(f),
            Err(e) => {
                let next = j * 10.0;
                if j <= 0.0 || next > max_jitter {
                    return Err(Error::SingularGram { pivot: e.pivot, jitter: j });
                }
                j = next;
            }
        }
    }
}

impl CholeskyFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `L^T x = y`.
    pub fn backward(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.backward(&self.forward(b))
    }

    /// `max |L L^T - (A + jitter I)|`.
    pub fn reconstruction_error(&self, a: &DMatrix<f64>) -> f64 {
        let rec = &self.l * self.l.transpose();
        let n = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = a[(i, j)] + if i == j { self.jitter } else { 0.0 };
                err = err.max((rec[(i, j)] - target).abs());
            }
        }
        err
    }
}

/// Relative stopping level of the pivoted factorization: residual variances at
/// or below `PIVOT_TOLERANCE * trace / n` are discarded.
pub const PIVOT_TOLERANCE: f64 = 1e-12;
/// Largest discarded residual variance, relative to `trace / n`, that is still
/// accepted when the rank cap stops the factorization early.
pub const PIVOT_CEILING: f64 = 1e-6;

/// Pivoted Cholesky `A ≈ Σ_k c_k c_k^T` of a positive semidefinite matrix
/// given through its diagonal and columns.
///
/// Columns are stored in the original index order; `pivots[k]` is the index
/// chosen at step `k`. Dropping the tail leaves residual variances no larger
/// than `residual_max` on the diagonal.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub columns: Vec<Vec<f64>>,
    pub pivots: Vec<usize>,
    pub residual_max: f64,
}

impl PivotedCholesky {
    /// `column(p, out)` must write `A[i][p]` into `out[i]` for all `i`.
    pub fn factor(diag: Vec<f64>, max_rank: usize, column: impl Fn(usize, &mut [f64]) + Sync) -> Result<Self> {
        let n = diag.len();
        let scale = if n == 0 { 0.0 } else { diag.iter().sum::<f64>() / n as f64 };
        let stop = PIVOT_TOLERANCE * scale;
        let mut d = diag;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut pivots = Vec::new();
        let residual_max = loop {
            let (p, dmax) =
                d.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
            if n == 0 || dmax <= stop {
                break dmax.max(0.0);
            }
            if columns.len() >= max_rank.min(n) {
                if dmax <= PIVOT_CEILING * scale {
                    break dmax;
                }
                return Err(Error::CholeskyFailure { required_jitter: dmax });
            }
            if !dmax.is_finite() {
                return Err(Error::CholeskyFailure { required_jitter: dmax });
            }
            let mut col = vec![0.0; n];
            column(p, &mut col);
            let inv = 1.0 / dmax.sqrt();
            let prev: Vec<(f64, &[f64])> = columns.iter().map(|c| (c[p], c.as_slice())).collect();
            const CHUNK: usize = 4096;
            col.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
                let off = ci * CHUNK;
                for (lp, c) in &prev {
                    let src = &c[off..off + chunk.len()];
                    for (o, s) in chunk.iter_mut().zip(src) {
                        *o -= lp * s;
                    }
                }
                for o in chunk.iter_mut() {
                    *o *= inv;
                }
            });
            for (di, ci) in d.iter_mut().zip(&col) {
                *di -= ci * ci;
            }
            d[p] = 0.0;
            pivots.push(p);
            columns.push(col);
        };
        Ok(PivotedCholesky { columns, pivots, residual_max })
    }

    /// Factorizes a dense symmetric matrix.
    pub fn of_matrix(a: &DMatrix<f64>, max_rank: usize) -> Result<Self> {
        let diag = a.diagonal().iter().cloned().collect();
        Self::factor(diag, max_rank, |p, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = a[(i, p)];
            }
        })
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// `Σ_k xi_k c_k`.
    pub fn combine(&self, xi: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (c, x) in self.columns.iter().zip(xi) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += x * v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let a = spd(8);
        let f = cholesky(&a, 0.0).unwrap();
        assert!(f.reconstruction_error(&a) < 1e-13);
        let b = DVector::from_fn(8, |i, _| i as f64 - 3.0);
        let x = f.solve(&b);
        assert!((&a * x - b).amax() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(jittered_cholesky(&a, 0.0, 1e-6), Err(Error::SingularGram { .. })));
        let f = jittered_cholesky(&a, 1e-10, 1e-6).unwrap();
        assert!(f.jitter() >= 1e-10);
    }

    #[test]
    fn pivoted_reconstructs_full_rank() {
        let a = spd(10);
        let p = PivotedCholesky::of_matrix(&a, 100).unwrap();
        assert_eq!(p.rank(), 10);
        let mut rec = DMatrix::zeros(10, 10);
        for c in &p.columns {
            let v = DVector::from_column_slice(c);
            rec += &v * v.transpose();
        }
        assert!((rec - a).amax() < 1e-12);
    }

    #[test]
    fn pivoted_detects_low_rank() {
        let v = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        let w = DVector::from_fn(6, |i, _| (i as f64).cos());
        let a = &v * v.transpose() + &w * w.transpose();
        let p = PivotedCholesky::of_matrix(&a, 6).unwrap();
        assert_eq!(p.rank(), 2);
        let zero = DMatrix::zeros(4, 4);
        assert_eq!(PivotedCholesky::of_matrix(&zero, 4).unwrap().rank(), 0);
    }

    #[test]
    fn pivoted_rank_cap_reports_failure() {
        let a = spd(10);
        assert!(matches!(PivotedCholesky::of_matrix(&a, 3), Err(Error::CholeskyFailure { .. })));
    }
}
