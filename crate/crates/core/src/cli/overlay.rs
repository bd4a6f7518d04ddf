//! Diagnostic drawings over the source image: regressed control points and
//! the deformed sampling lattice.

use crate::error::Result;
use crate::tensor::Tensor;
use crate::tps::{ControlPointGrid, Point};
use crate::tps_pp::SamplingGrid;

type Rgb = [f32; 3];

const RED: Rgb = [1.0, 0.15, 0.1];
const GREEN: Rgb = [0.2, 0.9, 0.3];
const YELLOW: Rgb = [1.0, 0.85, 0.1];
const CYAN: Rgb = [0.1, 0.8, 1.0];

struct Canvas {
    h: usize,
    w: usize,
    planes: Vec<f32>,
}

impl Canvas {
    /// Grey background from the channel mean, stretched to `[0, 1]` and
    /// dimmed so markers stand out.
    fn from_source(source: &Tensor) -> Result<Canvas> {
        let (c, h, w) = source.chw()?;
        let d = source.data();
        let mean: Vec<f32> = (0..h * w)
            .map(|i| (0..c).map(|ch| d[ch * h * w + i]).sum::<f32>() / c as f32)
            .collect();
        let (lo, hi) = mean
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let grey: Vec<f32> = mean.iter().map(|v| 0.7 * (v - lo) / span).collect();
        let mut planes = Vec::with_capacity(3 * h * w);
        for _ in 0..3 {
            planes.extend_from_slice(&grey);
        }
        Ok(Canvas { h, w, planes })
    }

    fn to_pixel(&self, p: Point) -> (f64, f64) {
        (
            (p.x + 1.0) / 2.0 * (self.w as f64 - 1.0),
            (p.y + 1.0) / 2.0 * (self.h as f64 - 1.0),
        )
    }

    fn plot(&mut self, x: i64, y: i64, color: Rgb) {
        if x < 0 || y < 0 || x >= self.w as i64 || y >= self.h as i64 {
            return;
        }
        let i = y as usize * self.w + x as usize;
        let plane = self.h * self.w;
        for (ch, v) in color.iter().enumerate() {
            self.planes[ch * plane + i] = *v;
        }
    }

    fn line(&mut self, a: Point, b: Point, color: Rgb) {
        let (x0, y0) = self.to_pixel(a);
        let (x1, y1) = self.to_pixel(b);
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return;
        }
        let steps = (x1 - x0)
            .abs()
            .max((y1 - y0).abs())
            .ceil()
            .clamp(1.0, 4096.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.plot(
                (x0 + t * (x1 - x0)).round() as i64,
                (y0 + t * (y1 - y0)).round() as i64,
                color,
            );
        }
    }

    fn marker(&mut self, p: Point, color: Rgb) {
        let (x, y) = self.to_pixel(p);
        if !(x.is_finite() && y.is_finite()) {
            return;
        }
        let (x, y) = (x.round() as i64, y.round() as i64);
        for (dx, dy) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
            self.plot(x + dx, y + dy, color);
        }
    }

    fn into_tensor(self) -> Result<Tensor> {
        Tensor::new(&[3, self.h, self.w], self.planes)
    }
}

/// Source image with the regressed lattice drawn in yellow, each point's
/// displacement from its base position in green, and the regressed points
/// as red crosses.
pub fn annotate_points(source: &Tensor, grid: &ControlPointGrid) -> Result<Tensor> {
    let mut canvas = Canvas::from_source(source)?;
    let (rows, cols) = (grid.rows(), grid.cols());
    let p = grid.regressed();
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            if j + 1 < cols {
                canvas.line(p[k], p[k + 1], YELLOW);
            }
            if i + 1 < rows {
                canvas.line(p[k], p[k + cols], YELLOW);
            }
        }
    }
    for (k, &base) in grid.base().iter().enumerate() {
        canvas.line(base, p[k], GREEN);
    }
    for &q in &p {
        canvas.marker(q, RED);
    }
    canvas.into_tensor()
}

/// Source image with every `step`-th row and column of the sampling grid
/// drawn as a polyline, showing where each output line reads from.
pub fn deformation_grid(source: &Tensor, grid: &SamplingGrid, step: usize) -> Result<Tensor> {
    let mut canvas = Canvas::from_source(source)?;
    let step = step.max(1);
    let (h, w) = (grid.height, grid.width);
    let mut rows: Vec<usize> = (0..h).step_by(step).collect();
    let mut cols: Vec<usize> = (0..w).step_by(step).collect();
    rows.push(h - 1);
    cols.push(w - 1);
    for &i in &rows {
        for j in 1..w {
            canvas.line(grid.at(i, j - 1), grid.at(i, j), CYAN);
        }
    }
    for &j in &cols {
        for i in 1..h {
            canvas.line(grid.at(i - 1, j), grid.at(i, j), CYAN);
        }
    }
    canvas.into_tensor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tps::make_grid;

    #[test]
    fn identity_grid_marks_corners() {
        let src = Tensor::full(&[1, 8, 16], 0.5).unwrap();
        let g = make_grid(2, 2).unwrap();
        let out = annotate_points(&src, &g).unwrap();
        assert_eq!(out.dims(), &[3, 8, 16]);
        // Top-left corner is a red marker.
        assert_eq!(out.data()[0], RED[0]);
        assert_eq!(out.data()[8 * 16], RED[1]);
    }

    #[test]
    fn deformation_lines_cover_the_border() {
        let src = Tensor::zeros(&[2, 6, 10]).unwrap();
        let out = deformation_grid(&src, &SamplingGrid::identity(6, 10), 4).unwrap();
        let plane = 60;
        for j in 0..10 {
            assert_eq!(out.data()[2 * plane + j], CYAN[2]);
            assert_eq!(out.data()[2 * plane + 50 + j], CYAN[2]);
        }
    }

    #[test]
    fn off_image_points_are_ignored() {
        let src = Tensor::zeros(&[1, 4, 4]).unwrap();
        let g = make_grid(2, 2)
            .unwrap()
            .with_offsets(vec![Point::new(50.0, -50.0); 4])
            .unwrap();
        assert!(annotate_points(&src, &g).is_ok());
    }
}
