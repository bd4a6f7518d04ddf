//! Thin-plate spline machinery: control-point lattices, the radial kernel,
//! and the transform solve.
//!
//! All coordinates live in the normalized frame `[-1, 1]²`, `x` to the right
//! and `y` downward. The linear system is built from the *base* lattice and
//! solved for the *regressed* points, so the resulting transform takes a
//! rectified-space location to the place in the source it should be read
//! from. Zero offsets therefore give the identity map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::linalg::Matrix;

/// Default lattice: 4 rows by 16 columns of control points.
pub const DEFAULT_ROWS: usize = 4;
pub const DEFAULT_COLS: usize = 16;
/// Default weight on attention scores in the kernel terms.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Default constant weight on the kernel terms.
pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Position of lattice index `i` out of `n` along one axis of `[-1, 1]`.
/// A single-sample axis sits at the centre.
pub fn lattice_coordinate(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// `rows × cols` control points, row-major (`k = row · cols + col`), each
/// with an offset from its lattice position.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointGrid {
    rows: usize,
    cols: usize,
    base: Vec<Point>,
    offsets: Vec<Point>,
}

/// Builds the uniform lattice with all offsets zero.
pub fn make_grid(rows: usize, cols: usize) -> Result<ControlPointGrid> {
    ControlPointGrid::new(rows, cols)
}

impl ControlPointGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) < 2 {
            return Err(Error::InvalidGrid(format!(
                "{rows}×{cols} lattice needs at least two points"
            )));
        }
        let base: Vec<Point> = (0..rows)
            .flat_map(|i| {
                (0..cols).map(move |j| {
                    Point::new(lattice_coordinate(j, cols), lattice_coordinate(i, rows))
                })
            })
            .collect();
        let offsets = vec![Point::default(); base.len()];
        Ok(ControlPointGrid {
            rows,
            cols,
            base,
            offsets,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of control points `K`.
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn base(&self) -> &[Point] {
        &self.base
    }

    pub fn offsets(&self) -> &[Point] {
        &self.offsets
    }

    pub fn set_offsets(&mut self, offsets: Vec<Point>) -> Result<()> {
        if offsets.len() != self.base.len() {
            return Err(Error::shape(format!(
                "{} offsets for {} control points",
                offsets.len(),
                self.base.len()
            )));
        }
        if let Some(k) = offsets
            .iter()
            .position(|o| !o.x.is_finite() || !o.y.is_finite())
        {
            return Err(Error::Validation(format!("offset {k} is not finite")));
        }
        self.offsets = offsets;
        Ok(())
    }

    pub fn with_offsets(mut self, offsets: Vec<Point>) -> Result<Self> {
        self.set_offsets(offsets)?;
        Ok(self)
    }

    pub fn regressed_point(&self, k: usize) -> Point {
        self.base[k] + self.offsets[k]
    }

    pub fn regressed(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.regressed_point(k)).collect()
    }
}

/// Radial function evaluated on a distance.
pub type RadialFn = fn(f64) -> f64;

/// `U(r) = r² ln r²`, with `U(0) = 0`. Total for `r ≥ 0`; see [`kernel_u`]
/// for the checked version.
pub fn thin_plate(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        let r2 = r * r;
        r2 * r2.ln()
    }
}

pub fn kernel_u(r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!(
            "kernel distance must be non-negative, got {r}"
        )));
    }
    Ok(thin_plate(r))
}

/// `s_ij = U(|c_i − c_j|)` over the base lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    s: Matrix,
}

impl KernelMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }
}

pub fn build_kernel_matrix(grid: &ControlPointGrid) -> KernelMatrix {
    kernel_matrix_with(grid.base(), thin_plate)
}

fn kernel_matrix_with(points: &[Point], kernel: RadialFn) -> KernelMatrix {
    let n = points.len();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = kernel(points[i].distance(points[j]));
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    KernelMatrix { s }
}

/// Solved spline: `p = T · F(p′)` where `F` stacks `[1, x, y]` with the
/// (optionally attention-weighted) kernel terms around each centre.
#[derive(Debug, Clone)]
pub struct TpsTransform {
    t_matrix: Matrix,
    centers: Vec<Point>,
    lambda: f64,
    beta: f64,
    kernel: RadialFn,
}

impl TpsTransform {
    /// The `2 × (K+3)` matrix; columns are `[bias, x, y, w_1 … w_K]`.
    pub fn t_matrix(&self) -> &Matrix {
        &self.t_matrix
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kernel(&self) -> RadialFn {
        self.kernel
    }

    pub fn with_weighting(mut self, lambda: f64, beta: f64) -> Self {
        self.lambda = lambda;
        self.beta = beta;
        self
    }

    /// Translation part `(t_x, t_y)`.
    pub fn bias(&self) -> Point {
        Point::new(self.t_matrix[(0, 0)], self.t_matrix[(1, 0)])
    }

    /// Linear part as `[[∂x/∂x, ∂x/∂y], [∂y/∂x, ∂y/∂y]]`.
    pub fn linear(&self) -> [[f64; 2]; 2] {
        let t = &self.t_matrix;
        [[t[(0, 1)], t[(0, 2)]], [t[(1, 1)], t[(1, 2)]]]
    }

    /// Kernel weights for output coordinate `axis` (0 = x, 1 = y).
    pub fn kernel_weights(&self, axis: usize) -> &[f64] {
        &self.t_matrix.row(axis)[3..]
    }
}

/// The `(K+3)×(K+3)` system and its `(K+3)×2` right-hand side, with
/// unknowns ordered `[bias, x, y, w_1..w_K]`.
pub fn assemble_system(grid: &ControlPointGrid, kernel: RadialFn) -> (Matrix, Matrix) {
    let k = grid.len();
    let n = k + 3;
    let s = kernel_matrix_with(grid.base(), kernel);

    let mut system = Matrix::zeros(n, n);
    let mut rhs = Matrix::zeros(n, 2);
    for (i, c) in grid.base().iter().enumerate() {
        system[(i, 0)] = 1.0;
        system[(i, 1)] = c.x;
        system[(i, 2)] = c.y;
        for j in 0..k {
            system[(i, 3 + j)] = s.get(i, j);
        }
        let target = grid.regressed_point(i);
        rhs[(i, 0)] = target.x;
        rhs[(i, 1)] = target.y;
    }
    for (j, c) in grid.base().iter().enumerate() {
        system[(k, 3 + j)] = 1.0;
        system[(k + 1, 3 + j)] = c.x;
        system[(k + 2, 3 + j)] = c.y;
    }

    (system, rhs)
}

/// Solves for the transform taking every base point to its regressed point.
pub fn solve_transform(grid: &ControlPointGrid) -> Result<TpsTransform> {
    solve_transform_with_kernel(grid, thin_plate)
}

/// [`solve_transform`] with a caller-chosen radial function.
pub fn solve_transform_with_kernel(
    grid: &ControlPointGrid,
    kernel: RadialFn,
) -> Result<TpsTransform> {
    if grid.rows() < 2 || grid.cols() < 2 {
        return Err(Error::Degenerate(format!(
            "{}×{} lattice is collinear",
            grid.rows(),
            grid.cols()
        )));
    }
    let (system, rhs) = assemble_system(grid, kernel);
    let solution = system.solve(&rhs).map_err(|e| match e {
        Error::Singular { column, pivot } => Error::Degenerate(format!(
            "control-point system is singular (pivot {pivot:e} at column {column})"
        )),
        other => other,
    })?;
    let t_matrix = solution.transpose();
    if !t_matrix.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate(
            "non-finite transform coefficients".into(),
        ));
    }
    Ok(TpsTransform {
        t_matrix,
        centers: grid.base().to_vec(),
        lambda: DEFAULT_LAMBDA,
        beta: DEFAULT_BETA,
        kernel,
    })
}
