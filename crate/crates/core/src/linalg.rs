//! Small dense matrices, rank-3/4 tensors and an LU solver.
//!
//! Everything here is desk scale (ranks rarely above 6), so the solver
//! favors clarity and determinism over speed: plain partial-pivoting LU,
//! condition estimated from the explicit inverse.

use crate::error::{CoreError, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(CoreError::Invalid("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * x[c]).sum())
            .collect()
    }

    /// Maximum absolute entry; 0 for empty matrices.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)].abs()).sum())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Rank-3 tensor indexed (a, b, c) with per-axis dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: (d0, d1, d2),
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.dims.1 + b) * self.dims.2 + c]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.dims.1 + b) * self.dims.2 + c]
    }
}

/// Rank-4 tensor indexed (a, b, c, d).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dims: (usize, usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(d0: usize, d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d0, d1, d2, d3),
            data: vec![0.0; d0 * d1 * d2 * d3],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((a * self.dims.1 + b) * self.dims.2 + c) * self.dims.3 + d]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((a * self.dims.1 + b) * self.dims.2 + c) * self.dims.3 + d]
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Mat,
    pivots: Vec<usize>,
    det: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Self {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut pivots = Vec::with_capacity(n);
        let mut det = 1.0;

        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for r in k + 1..n {
                let v = lu[(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots.push(p);
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                det = -det;
            }
            let piv = lu[(k, k)];
            det *= piv;
            if piv == 0.0 {
                continue;
            }
            for r in k + 1..n {
                let factor = lu[(r, k)] / piv;
                lu[(r, k)] = factor;
                for c in k + 1..n {
                    lu[(r, c)] -= factor * lu[(k, c)];
                }
            }
        }

        Self { n, lu, pivots, det }
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_singular(&self) -> bool {
        self.det == 0.0 || !self.det.is_finite()
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        if self.is_singular() {
            return None;
        }
        let mut x = b.to_vec();
        for k in 0..self.n {
            x.swap(k, self.pivots[k]);
        }
        for k in 0..self.n {
            for r in k + 1..self.n {
                x[r] -= self.lu[(r, k)] * x[k];
            }
        }
        for k in (0..self.n).rev() {
            for c in k + 1..self.n {
                x[k] -= self.lu[(k, c)] * x[c];
            }
            x[k] /= self.lu[(k, k)];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat> {
        let mut inv = Mat::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for c in 0..self.n {
            e[c] = 1.0;
            let col = self.solve(&e)?;
            e[c] = 0.0;
            for r in 0..self.n {
                inv[(r, c)] = col[r];
            }
        }
        Some(inv)
    }

    /// Infinity-norm condition estimate from the explicit inverse.
    pub fn condition_estimate(&self, a: &Mat) -> f64 {
        match self.inverse() {
            Some(inv) => a.norm_inf() * inv.norm_inf(),
            None => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_known_3x3() {
        let a = Mat::from_rows(vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ])
        .unwrap();
        let lu = Lu::factor(&a);
        let x = lu.solve(&[8.0, -11.0, -3.0]).unwrap();
        let expect = [2.0, 3.0, -1.0];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-12);
        }
        assert!((lu.det() - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn residual_after_solve_is_tiny() {
        // Fixed pseudo-random 5x5 system, checked by multiplying back.
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1_u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = Mat::from_fn(5, 5, |r, c| next() + if r == c { 3.0 } else { 0.0 });
        let b: Vec<f64> = (0..5).map(|_| next()).collect();
        let lu = Lu::factor(&a);
        let x = lu.solve(&b).unwrap();
        let r = a.matvec(&x);
        for i in 0..5 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_reports_zero_det() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let lu = Lu::factor(&a);
        assert_eq!(lu.det(), 0.0);
        assert!(lu.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn condition_of_identity_is_one() {
        let a = Mat::identity(4);
        let lu = Lu::factor(&a);
        assert!((lu.condition_estimate(&a) - 1.0).abs() < 1e-14);
    }
}
