//! Attention-weighted spline evaluation, sampling grids, and bilinear warping.
//!
//! Each kernel term of the basis is scaled by `λ·a_k + β`, where `a_k` is the
//! attention score between the queried output location and control point
//! `k`. With `λ = 0` and `β = 1` this is the plain thin-plate spline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tps::{lattice_coordinate, Point, TpsTransform};

/// Scores in `(-1, 1)` between every output location (row-major over the
/// output lattice) and every control point.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    m_locations: usize,
    k_points: usize,
    scores: Vec<f64>,
}

impl AttentionMatrix {
    pub fn new(m_locations: usize, k_points: usize, scores: Vec<f64>) -> Result<Self> {
        if m_locations == 0 || k_points == 0 {
            return Err(Error::shape("attention matrix needs positive extents"));
        }
        if scores.len() != m_locations * k_points {
            return Err(Error::shape(format!(
                "{m_locations}×{k_points} attention needs {} scores, got {}",
                m_locations * k_points,
                scores.len()
            )));
        }
        if let Some(idx) = scores.iter().position(|a| !(a.abs() < 1.0)) {
            return Err(Error::Validation(format!(
                "attention score {} at row {}, col {} is outside (-1, 1)",
                scores[idx],
                idx / k_points,
                idx % k_points
            )));
        }
        Ok(AttentionMatrix {
            m_locations,
            k_points,
            scores,
        })
    }

    pub fn zeros(m_locations: usize, k_points: usize) -> Result<Self> {
        Self::new(m_locations, k_points, vec![0.0; m_locations * k_points])
    }

    /// From an `M×K` tensor.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (m, k) = t.matrix_dims()?;
        Self::new(m, k, t.data().iter().map(|&v| v as f64).collect())
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(
            &[self.m_locations, self.k_points],
            self.scores.iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn m_locations(&self) -> usize {
        self.m_locations
    }

    pub fn k_points(&self) -> usize {
        self.k_points
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.k_points..(i + 1) * self.k_points]
    }

    pub fn max_abs(&self) -> f64 {
        self.scores.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Nearest-neighbour resampling from a `src_h × src_w` output lattice to
    /// an `out_h × out_w` one.
    pub fn resample(&self, src_h: usize, src_w: usize, out_h: usize, out_w: usize) -> Result<Self> {
        if src_h * src_w != self.m_locations {
            return Err(Error::shape(format!(
                "{src_h}×{src_w} lattice does not match {} attention rows",
                self.m_locations
            )));
        }
        let k = self.k_points;
        let mut scores = Vec::with_capacity(out_h * out_w * k);
        for i in 0..out_h {
            let si = (i * src_h) / out_h;
            for j in 0..out_w {
                let sj = (j * src_w) / out_w;
                scores.extend_from_slice(self.row(si * src_w + sj));
            }
        }
        Self::new(out_h * out_w, k, scores)
    }
}

/// Source coordinate for every output location, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub height: usize,
    pub width: usize,
    pub coords: Vec<Point>,
}

impl SamplingGrid {
    pub fn new(height: usize, width: usize, coords: Vec<Point>) -> Result<Self> {
        if coords.len() != height * width {
            return Err(Error::shape(format!(
                "{height}×{width} sampling grid needs {} coordinates, got {}",
                height * width,
                coords.len()
            )));
        }
        Ok(SamplingGrid {
            height,
            width,
            coords,
        })
    }

    /// The regular output lattice itself: sampling it reproduces the source.
    pub fn identity(height: usize, width: usize) -> Self {
        let coords = (0..height)
            .flat_map(|i| (0..width).map(move |j| output_location(i, j, height, width)))
            .collect();
        SamplingGrid {
            height,
            width,
            coords,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> Point {
        self.coords[row * self.width + col]
    }
}

/// Rectified-space coordinate of output pixel `(row, col)`.
pub fn output_location(row: usize, col: usize, height: usize, width: usize) -> Point {
    Point::new(
        lattice_coordinate(col, width),
        lattice_coordinate(row, height),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderPolicy {
    /// Samples outside the source contribute zero.
    #[default]
    Zeros,
    /// Coordinates are clipped to the source box.
    Clamp,
}

impl std::str::FromStr for BorderPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(BorderPolicy::Zeros),
            "clamp" => Ok(BorderPolicy::Clamp),
            other => Err(Error::Validation(format!(
                "unknown border policy `{other}`"
            ))),
        }
    }
}

fn check_row(transform: &TpsTransform, attention_row: &[f64]) -> Result<()> {
    if attention_row.len() != transform.len() {
        return Err(Error::shape(format!(
            "attention row has {} scores for {} control points",
            attention_row.len(),
            transform.len()
        )));
    }
    Ok(())
}

/// `[1, x, y, U(|p − c_k|)·(λ·a_k + β) …]`.
pub fn basis_vector(p: Point, transform: &TpsTransform, attention_row: &[f64]) -> Result<Vec<f64>> {
    check_row(transform, attention_row)?;
    let (lambda, beta, u) = (transform.lambda(), transform.beta(), transform.kernel());
    let mut basis = Vec::with_capacity(transform.len() + 3);
    basis.extend([1.0, p.x, p.y]);
    basis.extend(
        transform
            .centers()
            .iter()
            .zip(attention_row)
            .map(|(&c, &a)| u(p.distance(c)) * (lambda * a + beta)),
    );
    Ok(basis)
}

fn apply(transform: &TpsTransform, p: Point, weight: impl Fn(usize) -> f64) -> Point {
    let t = transform.t_matrix();
    let (rx, ry) = (t.row(0), t.row(1));
    let u = transform.kernel();
    let mut x = rx[0] + rx[1] * p.x + rx[2] * p.y;
    let mut y = ry[0] + ry[1] * p.x + ry[2] * p.y;
    for (k, &c) in transform.centers().iter().enumerate() {
        let f = u(p.distance(c)) * weight(k);
        x += rx[3 + k] * f;
        y += ry[3 + k] * f;
    }
    Point::new(x, y)
}

/// `T · F(p)` for one attention row.
pub fn map_point(p: Point, transform: &TpsTransform, attention_row: &[f64]) -> Result<Point> {
    check_row(transform, attention_row)?;
    let (lambda, beta) = (transform.lambda(), transform.beta());
    Ok(apply(transform, p, |k| lambda * attention_row[k] + beta))
}

/// `T · F(p)` with an all-zero attention row, i.e. every kernel term scaled
/// by `β`.
pub fn map_point_classic(p: Point, transform: &TpsTransform) -> Point {
    let beta = transform.beta();
    apply(transform, p, |_| beta)
}

/// Maps every location of the `out_h × out_w` output lattice back into the
/// source frame.
pub fn build_sampling_grid(
    transform: &TpsTransform,
    attention: &AttentionMatrix,
    out_h: usize,
    out_w: usize,
) -> Result<SamplingGrid> {
    if attention.m_locations() != out_h * out_w {
        return Err(Error::shape(format!(
            "attention has {} rows for a {out_h}×{out_w} output",
            attention.m_locations()
        )));
    }
    if attention.k_points() != transform.len() {
        return Err(Error::shape(format!(
            "attention has {} columns for {} control points",
            attention.k_points(),
            transform.len()
        )));
    }
    let (lambda, beta) = (transform.lambda(), transform.beta());
    let coords: Vec<Point> = (0..out_h * out_w)
        .into_par_iter()
        .map(|idx| {
            let p = output_location(idx / out_w, idx % out_w, out_h, out_w);
            let row = attention.row(idx);
            apply(transform, p, |k| lambda * row[k] + beta)
        })
        .collect();
    SamplingGrid::new(out_h, out_w, coords)
}

/// Bilinear resampling of a `C×H×W` map at the grid's coordinates.
pub fn warp(source: &Tensor, grid: &SamplingGrid, border: BorderPolicy) -> Result<Tensor> {
    let (c, h, w) = source.chw()?;
    let (oh, ow) = (grid.height, grid.width);
    if grid.coords.len() != oh * ow {
        return Err(Error::shape("sampling grid coordinate count mismatch"));
    }
    let src = source.data();
    let xmax = (w - 1) as f64;
    let ymax = (h - 1) as f64;

    let mut out = vec![0.0f32; c * oh * ow];
    out.par_chunks_mut(ow)
        .enumerate()
        .for_each(|(row_idx, row)| {
            let ch = row_idx / oh;
            let i = row_idx % oh;
            let plane = &src[ch * h * w..(ch + 1) * h * w];
            for (j, o) in row.iter_mut().enumerate() {
                let p = grid.coords[i * ow + j];
                let mut sx = (p.x + 1.0) / 2.0 * xmax;
                let mut sy = (p.y + 1.0) / 2.0 * ymax;
                if !(sx.is_finite() && sy.is_finite()) {
                    *o = 0.0;
                    continue;
                }
                if border == BorderPolicy::Clamp {
                    sx = sx.clamp(0.0, xmax);
                    sy = sy.clamp(0.0, ymax);
                }
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = sx - x0;
                let fy = sy - y0;
                let sample = |xi: f64, yi: f64| -> f64 {
                    let (xi, yi) = match border {
                        BorderPolicy::Clamp => (xi.min(xmax), yi.min(ymax)),
                        BorderPolicy::Zeros => (xi, yi),
                    };
                    if xi < 0.0 || yi < 0.0 || xi > xmax || yi > ymax {
                        0.0
                    } else {
                        plane[yi as usize * w + xi as usize] as f64
                    }
                };
                let v = sample(x0, y0) * (1.0 - fx) * (1.0 - fy)
                    + sample(x0 + 1.0, y0) * fx * (1.0 - fy)
                    + sample(x0, y0 + 1.0) * (1.0 - fx) * fy
                    + sample(x0 + 1.0, y0 + 1.0) * fx * fy;
                *o = v as f32;
            }
        });
    Tensor::new(&[c, oh, ow], out)
}
