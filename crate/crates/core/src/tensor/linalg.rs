//! Dense `f64` matrices and an LU solver with partial pivoting.
//!
//! Control-point systems are solved in double precision; the `f32`
//! [`solve_linear`] entry point widens, solves, and narrows.

use super::Tensor;
use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude mark the system as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "matmul inner dims differ: {}×{} · {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for p in 0..self.cols {
                let a = self[(i, p)];
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(p, j)];
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.lu()?.solve(rhs)
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(
            &[self.rows, self.cols],
            self.data.iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn from_tensor(t: &Tensor) -> Result<Matrix> {
        let (r, c) = t.matrix_dims()?;
        Matrix::from_vec(r, c, t.data().iter().map(|&v| v as f64).collect())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors `P·A = L·U`, unit diagonal on `L`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    factors: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &Matrix) -> Result<Lu> {
        if m.rows != m.cols {
            return Err(Error::shape(format!(
                "LU needs a square matrix, got {}×{}",
                m.rows, m.cols
            )));
        }
        let n = m.rows;
        let mut a = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + k]))
                .fold((k, 0.0f64), |best, (i, v)| {
                    if v.abs() > best.1.abs() {
                        (i, v)
                    } else {
                        best
                    }
                });
            if !(pivot.abs() >= PIVOT_THRESHOLD) {
                return Err(Error::Singular { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let l = a[i * n + k] / pivot;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Ok(Lu {
            n,
            factors: a,
            perm,
        })
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.n;
        if rhs.rows != n {
            return Err(Error::shape(format!(
                "rhs has {} rows, system has {n}",
                rhs.rows
            )));
        }
        let c = rhs.cols;
        let a = &self.factors;
        let mut x = Matrix::from_fn(n, c, |i, j| rhs[(self.perm[i], j)]);
        for i in 0..n {
            for k in 0..i {
                let l = a[i * n + k];
                if l != 0.0 {
                    for j in 0..c {
                        x.data[i * c + j] -= l * x.data[k * c + j];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = a[i * n + k];
                if u != 0.0 {
                    for j in 0..c {
                        x.data[i * c + j] -= u * x.data[k * c + j];
                    }
                }
            }
            let d = a[i * n + i];
            for j in 0..c {
                x.data[i * c + j] /= d;
            }
        }
        Ok(x)
    }
}

/// Solves `m · X = rhs` for `f32` tensors, factoring in `f64`.
pub fn solve_linear(m: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    let a = Matrix::from_tensor(m)?;
    let b = Matrix::from_tensor(rhs)?;
    a.solve(&b)?.to_tensor()
}

/// `‖m·x − rhs‖∞`.
pub fn residual_inf(m: &Matrix, x: &Matrix, rhs: &Matrix) -> Result<f64> {
    let mx = m.matmul(x)?;
    Ok(mx
        .data
        .iter()
        .zip(&rhs.data)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs_exactly() {
        let rhs = Matrix::from_vec(4, 2, vec![1.5, -2.0, 3.25, 0.0, 7.0, 1e-3, -4.0, 9.0]).unwrap();
        assert_eq!(Matrix::identity(4).solve(&rhs).unwrap(), rhs);
    }

    #[test]
    fn diagonal_system() {
        let m = Tensor::new(&[2, 2], vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let rhs = Tensor::new(&[2, 1], vec![2.0, 8.0]).unwrap();
        assert_eq!(solve_linear(&m, &rhs).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_leading_entry_needs_pivot() {
        let m = Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let rhs = Matrix::from_vec(2, 1, vec![3.0, 5.0]).unwrap();
        assert_eq!(m.solve(&rhs).unwrap().data(), &[5.0, 3.0]);
    }

    #[test]
    fn singular_is_reported() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        let rhs = Matrix::zeros(2, 1);
        assert!(matches!(
            m.solve(&rhs),
            Err(Error::Singular { column: 1, .. })
        ));
        let tiny = Matrix::from_vec(1, 1, vec![1e-13]).unwrap();
        assert!(matches!(
            tiny.solve(&Matrix::zeros(1, 1)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(Matrix::zeros(2, 3).lu(), Err(Error::Shape(_))));
        assert!(matches!(
            Matrix::identity(3).solve(&Matrix::zeros(2, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn matches_full_pivot_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let m = oracle::random_well_conditioned(10, &mut rng);
            let rhs = Matrix::from_fn(10, 3, |_, _| rng.gen_range(-1.0..1.0));
            let got = m.solve(&rhs).unwrap();
            let want = oracle::gauss_full_pivot(&m, &rhs).unwrap();
            for (g, w) in got.data().iter().zip(want.data()) {
                assert!((g - w).abs() <= 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn residual_bound_holds(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = oracle::random_well_conditioned(n, &mut rng);
            let rhs = Matrix::from_fn(n, 2, |_, _| rng.gen_range(-10.0..10.0));
            let x = m.solve(&rhs).unwrap();
            let r = residual_inf(&m, &x, &rhs).unwrap();
            prop_assert!(r <= 1e-6 * (1.0 + rhs.max_abs()));
            prop_assert_eq!(x, m.solve(&rhs).unwrap());
        }
    }
}
