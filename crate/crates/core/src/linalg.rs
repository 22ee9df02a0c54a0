//! Small dense linear algebra for the summary matrices.
//!
//! Everything the estimators keep is at most `(2 + p + q)` square, so a
//! row-major `Vec<f64>` and an unblocked Cholesky are all that is needed.

use crate::error::{Error, Result};

/// Largest condition estimate accepted before a system is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix buffer holds {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `x' A x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `X'X` of this matrix.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let gi = &mut g.data[i * d..i * d + d];
                for j in i..d {
                    gi[j] += ri * row[j];
                }
            }
        }
        g.mirror_upper();
        g
    }

    /// `X' diag(weights) X`.
    pub fn weighted_gram(&self, weights: &[f64]) -> Matrix {
        debug_assert_eq!(weights.len(), self.rows);
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for (r, &w) in weights.iter().enumerate() {
            let row = self.row(r);
            for i in 0..d {
                let wi = w * row[i];
                if wi == 0.0 {
                    continue;
                }
                let gi = &mut g.data[i * d..i * d + d];
                for j in i..d {
                    gi[j] += wi * row[j];
                }
            }
        }
        g.mirror_upper();
        g
    }

    /// `X' v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += x * vr;
            }
        }
        out
    }

    fn mirror_upper(&mut self) {
        let d = self.cols;
        for i in 0..d {
            for j in 0..i {
                self.data[i * d + j] = self.data[j * d + i];
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor of a Jacobi-equilibrated symmetric positive-definite matrix.
///
/// The input `A` is rescaled to `S A S` with `S = diag(A_ii^{-1/2})` before
/// factoring; solves undo the scaling, so callers see plain `A^{-1} b`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
    scale: Vec<f64>,
    condition: f64,
}

impl Cholesky {
    /// Factors `a`, refusing matrices whose equilibrated 1-norm condition
    /// estimate exceeds [`MAX_CONDITION`]. `design` names the offending system
    /// in the error.
    pub fn factor(a: &Matrix, design: &'static str) -> Result<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut scale = Vec::with_capacity(n);
        for i in 0..n {
            let d = a.get(i, i);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::RankDeficient {
                    design,
                    condition: f64::INFINITY,
                });
            }
            scale.push(d.sqrt().recip());
        }
        let mut scaled = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                scaled.set(i, j, a.get(i, j) * scale[i] * scale[j]);
            }
        }
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| scaled.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max);

        let mut lower = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = scaled.get(j, j);
            for k in 0..j {
                diag -= lower.get(j, k) * lower.get(j, k);
            }
            if !(diag > 0.0) {
                return Err(Error::RankDeficient {
                    design,
                    condition: f64::INFINITY,
                });
            }
            let ljj = diag.sqrt();
            lower.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut s = scaled.get(i, j);
                for k in 0..j {
                    s -= lower.get(i, k) * lower.get(j, k);
                }
                lower.set(i, j, s / ljj);
            }
        }

        let mut chol = Cholesky {
            lower,
            scale,
            condition: f64::NAN,
        };
        chol.condition = norm1 * chol.inverse_norm1_estimate();
        if !(chol.condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient {
                design,
                condition: chol.condition,
            });
        }
        Ok(chol)
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// 1-norm condition estimate of the equilibrated matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let scaled_b: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        let mut x = self.solve_scaled(&scaled_b);
        for (v, s) in x.iter_mut().zip(&self.scale) {
            *v *= s;
        }
        x
    }

    /// `(A^{-1})_{ii}` without forming the inverse.
    pub fn inverse_diagonal_entry(&self, i: usize) -> f64 {
        let n = self.dim();
        // (S L L' S)^{-1}_ii = s_i^2 * || L^{-1} e_i ||^2
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let z = self.forward(&e);
        self.scale[i] * self.scale[i] * dot(&z, &z)
    }

    /// Full inverse; used for variance matrices, never for estimation.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        inv
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lower.get(i, k) * z[k];
            }
            z[i] = s / self.lower.get(i, i);
        }
        z
    }

    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower.get(k, i) * x[k];
            }
            x[i] = s / self.lower.get(i, i);
        }
        x
    }

    /// Hager's estimator of `||B^{-1}||_1` for the equilibrated matrix `B`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.solve_scaled(&x);
            estimate = y.iter().map(|v| v.abs()).sum();
            let sign: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = self.solve_scaled(&sign);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, v)| {
                    if v.abs() > bv {
                        (j, v.abs())
                    } else {
                        (bj, bv)
                    }
                });
            if zmax <= dot(&z, &x) {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd3() -> Matrix {
        Matrix::from_row_major(3, 3, vec![4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0])
            .unwrap()
    }

    #[test]
    fn solves_classic_spd_system() {
        let a = spd3();
        let chol = Cholesky::factor(&a, "test").unwrap();
        let x = chol.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*b, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn inverse_diagonal_matches_full_inverse() {
        let a = spd3();
        let chol = Cholesky::factor(&a, "test").unwrap();
        let inv = chol.inverse();
        for i in 0..3 {
            assert_relative_eq!(chol.inverse_diagonal_entry(i), inv.get(i, i), max_relative = 1e-12);
        }
        // A * A^{-1} = I
        for j in 0..3 {
            let col = a.mul_vec(&inv.column(j));
            for (i, v) in col.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn condition_estimate_is_exact_for_diagonal() {
        // Equilibration turns any positive diagonal into the identity.
        let a = Matrix::from_row_major(2, 2, vec![1e6, 0.0, 0.0, 1e-6]).unwrap();
        let chol = Cholesky::factor(&a, "test").unwrap();
        assert_relative_eq!(chol.condition(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(chol.solve(&[1.0, 1.0])[1], 1e6, max_relative = 1e-12);
    }

    #[test]
    fn rejects_collinear_gram() {
        // Second column is exactly twice the first.
        let x = Matrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let err = Cholesky::factor(&x.gram(), "outcome").unwrap_err();
        assert!(matches!(err, Error::RankDeficient { design: "outcome", .. }));
    }

    #[test]
    fn rejects_nearly_collinear_gram() {
        let eps = 1e-8;
        let x = Matrix::from_row_major(3, 2, vec![1.0, 1.0, 1.0, 1.0 + eps, 1.0, 1.0 - eps]).unwrap();
        assert!(Cholesky::factor(&x.gram(), "mediator").is_err());
    }

    #[test]
    fn rejects_zero_column() {
        let x = Matrix::from_row_major(2, 2, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert!(Cholesky::factor(&x.gram(), "outcome").is_err());
    }

    #[test]
    fn gram_and_weighted_gram_agree_with_unit_weights() {
        let x = Matrix::from_row_major(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.0]).unwrap();
        assert_eq!(x.gram(), x.weighted_gram(&[1.0, 1.0, 1.0]));
        assert_eq!(x.gram().get(0, 1), 1.0 * 2.0 - 0.5 + 3.0);
        assert_eq!(x.t_mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.5]);
    }
}
