//! Reference implementations used to cross-check the engine.
//!
//! Nothing here calls into the solver, spline, or sampler code it is used to
//! check. Each routine is the most literal version of its formula: nested
//! loops, full-pivot elimination, a separately derived spline evaluator.

use rand::Rng;

use crate::tensor::{Matrix, Tensor};

/// Direct nested-loop cross-correlation with zero padding, accumulated in f64.
pub fn conv2d(x: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Vec<f64> {
    let d = x.dims();
    let (c, h, w) = (d[0], d[1], d[2]);
    let k = kernel.dims();
    let (o, kh, kw) = (k[0], k[2], k[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let at = |ch: usize, y: isize, xx: isize| -> f64 {
        if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
            0.0
        } else {
            x.data()[(ch * h + y as usize) * w + xx as usize] as f64
        }
    };
    let mut out = Vec::with_capacity(o * oh * ow);
    for oc in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias.data()[oc] as f64;
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            acc += kernel.data()[((oc * c + ic) * kh + ky) * kw + kx] as f64
                                * at(ic, y, xx);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Gaussian elimination with full (row and column) pivoting.
/// Returns `None` when a pivot vanishes.
pub fn gauss_full_pivot(m: &Matrix, rhs: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    let c = rhs.cols();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut b: Vec<Vec<f64>> = (0..n).map(|i| rhs.row(i).to_vec()).collect();
    let mut col_of: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut best = (k, k, 0.0f64);
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.abs() > best.2 {
                    best = (i, j, v.abs());
                }
            }
        }
        if best.2 == 0.0 {
            return None;
        }
        a.swap(k, best.0);
        b.swap(k, best.0);
        if best.1 != k {
            for row in a.iter_mut() {
                row.swap(k, best.1);
            }
            col_of.swap(k, best.1);
        }
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            for j in 0..c {
                b[i][j] -= f * b[k][j];
            }
        }
    }

    let mut y = vec![vec![0.0; c]; n];
    for i in (0..n).rev() {
        for j in 0..c {
            let mut s = b[i][j];
            for p in i + 1..n {
                s -= a[i][p] * y[p][j];
            }
            y[i][j] = s / a[i][i];
        }
    }
    let mut x = Matrix::zeros(n, c);
    for (i, row) in y.iter().enumerate() {
        for j in 0..c {
            x[(col_of[i], j)] = row[j];
        }
    }
    Some(x)
}

/// Random strictly diagonally dominant matrix.
pub fn random_well_conditioned(n: usize, rng: &mut impl Rng) -> Matrix {
    let mut m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        m[(i, i)] = sign * (off + rng.gen_range(1.0..2.0));
    }
    m
}

/// Thin-plate radial function written against the squared distance:
/// `U = d² · ln d²`, zero at the origin.
pub fn thin_plate_sq(d2: f64) -> f64 {
    if d2 == 0.0 {
        0.0
    } else {
        d2 * d2.ln()
    }
}

/// Classic thin-plate spline solved from scratch: `f(p) = a₁ + aₓx + a_y y +
/// Σ wᵢ U(|Pᵢ − p|)` with `Σw = Σw·x = Σw·y = 0`.
pub struct ClassicTps {
    sources: Vec<(f64, f64)>,
    // columns: x-target, y-target; rows: w_1..w_n, a_1, a_x, a_y
    coeffs: Matrix,
}

impl ClassicTps {
    pub fn fit(sources: &[(f64, f64)], targets: &[(f64, f64)]) -> Option<ClassicTps> {
        let n = sources.len();
        let size = n + 3;
        let mut l = Matrix::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                let dx = sources[i].0 - sources[j].0;
                let dy = sources[i].1 - sources[j].1;
                l[(i, j)] = thin_plate_sq(dx * dx + dy * dy);
            }
            let p = [1.0, sources[i].0, sources[i].1];
            for (c, v) in p.iter().enumerate() {
                l[(i, n + c)] = *v;
                l[(n + c, i)] = *v;
            }
        }
        let mut v = Matrix::zeros(size, 2);
        for (i, t) in targets.iter().enumerate() {
            v[(i, 0)] = t.0;
            v[(i, 1)] = t.1;
        }
        let coeffs = gauss_full_pivot(&l, &v)?;
        Some(ClassicTps {
            sources: sources.to_vec(),
            coeffs,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.sources.len();
        let mut out = [0.0f64; 2];
        for (axis, o) in out.iter_mut().enumerate() {
            let c = |r: usize| self.coeffs[(r, axis)];
            let mut acc = c(n) + c(n + 1) * x + c(n + 2) * y;
            for (i, s) in self.sources.iter().enumerate() {
                let dx = s.0 - x;
                let dy = s.1 - y;
                acc += c(i) * thin_plate_sq(dx * dx + dy * dy);
            }
            *o = acc;
        }
        (out[0], out[1])
    }
}

/// Evaluates a transform row-vector `t` (layout `[bias, x, y, w_1..w_K]`)
/// at `p` with the classic unweighted basis.
pub fn eval_affine_plus_kernel(t: &[f64], centers: &[(f64, f64)], x: f64, y: f64) -> f64 {
    let mut acc = t[0] + t[1] * x + t[2] * y;
    for (k, c) in centers.iter().enumerate() {
        let dx = x - c.0;
        let dy = y - c.1;
        acc += t[3 + k] * thin_plate_sq(dx * dx + dy * dy);
    }
    acc
}

/// Four-neighbour bilinear lookup at normalized `(x, y)` with zero fill
/// outside the image, or clamped to the border when `clamp` is set.
pub fn bilinear(source: &Tensor, channel: usize, x: f64, y: f64, clamp: bool) -> f64 {
    let d = source.dims();
    let (h, w) = (d[1], d[2]);
    let mut sx = (x + 1.0) / 2.0 * (w as f64 - 1.0);
    let mut sy = (y + 1.0) / 2.0 * (h as f64 - 1.0);
    if clamp {
        sx = sx.max(0.0).min(w as f64 - 1.0);
        sy = sy.max(0.0).min(h as f64 - 1.0);
    }
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let pixel = |xi: f64, yi: f64| -> f64 {
        let (xi, yi) = if clamp {
            (xi.min(w as f64 - 1.0), yi.min(h as f64 - 1.0))
        } else {
            (xi, yi)
        };
        if xi < 0.0 || yi < 0.0 || xi > w as f64 - 1.0 || yi > h as f64 - 1.0 {
            0.0
        } else {
            source.data()[(channel * h + yi as usize) * w + xi as usize] as f64
        }
    };
    pixel(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + pixel(x0 + 1.0, y0) * fx * (1.0 - fy)
        + pixel(x0, y0 + 1.0) * (1.0 - fx) * fy
        + pixel(x0 + 1.0, y0 + 1.0) * fx * fy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_pivot_solves_permuted_system() {
        let m = Matrix::from_vec(3, 3, vec![0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0]).unwrap();
        let rhs = Matrix::from_vec(3, 1, vec![2.0, 9.0, 8.0]).unwrap();
        let x = gauss_full_pivot(&m, &rhs).unwrap();
        assert_eq!(x.data(), &[2.0, 1.0, 3.0]);
        assert!(gauss_full_pivot(&Matrix::zeros(2, 2), &Matrix::zeros(2, 1)).is_none());
    }

    #[test]
    fn classic_tps_interpolates() {
        let src = [
            (-1.0, -1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (1.0, 1.0),
            (0.0, 0.2),
        ];
        let dst = [
            (-0.9, -1.0),
            (1.0, -0.8),
            (-1.1, 1.0),
            (1.0, 1.2),
            (0.1, 0.0),
        ];
        let tps = ClassicTps::fit(&src, &dst).unwrap();
        for (s, d) in src.iter().zip(&dst) {
            let (x, y) = tps.eval(s.0, s.1);
            assert!((x - d.0).abs() < 1e-12 && (y - d.1).abs() < 1e-12);
        }
    }
}
