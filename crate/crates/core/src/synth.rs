//! Synthetic distorted-text stand-in: a bright horizontal stripe displaced
//! vertically by a sinusoid, plus uniform noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{INPUT_H, INPUT_W};
use crate::tensor::Tensor;
use crate::tps::{ControlPointGrid, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeParams {
    pub height: usize,
    pub width: usize,
    /// Peak vertical displacement in pixels.
    pub amplitude: f64,
    /// Number of sine periods across the width.
    pub periods: f64,
    pub half_thickness: f64,
    pub background: f32,
    pub foreground: f32,
    /// Noise is uniform in `[-noise, noise]`.
    pub noise: f32,
}

impl Default for StripeParams {
    fn default() -> Self {
        StripeParams {
            height: INPUT_H,
            width: INPUT_W,
            amplitude: 6.0,
            periods: 1.0,
            half_thickness: 3.0,
            background: 0.1,
            foreground: 0.9,
            noise: 0.03,
        }
    }
}

impl StripeParams {
    /// Stripe centre row at pixel column `x`.
    pub fn centerline(&self, x: f64) -> f64 {
        let phase = x / (self.width as f64 - 1.0).max(1.0);
        (self.height as f64 - 1.0) / 2.0
            + self.amplitude * (2.0 * std::f64::consts::PI * self.periods * phase).sin()
    }

    /// Offsets that move each lattice point onto the displaced stripe, so
    /// the solved transform reads a straight stripe out of the image.
    pub fn counter_offsets(&self, grid: &ControlPointGrid) -> Vec<Point> {
        let scale = 2.0 / (self.height as f64 - 1.0).max(1.0);
        grid.base()
            .iter()
            .map(|c| {
                let x_pix = (c.x + 1.0) / 2.0 * (self.width as f64 - 1.0);
                let centre = (self.height as f64 - 1.0) / 2.0;
                Point::new(0.0, (self.centerline(x_pix) - centre) * scale)
            })
            .collect()
    }
}

/// Renders the stripe as a `1×H×W` tensor in `[0, 1]`; deterministic per
/// seed.
pub fn stripe_image(params: &StripeParams, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (params.height, params.width);
    let mut data = vec![0.0f32; h * w];
    for x in 0..w {
        let centre = params.centerline(x as f64);
        for y in 0..h {
            // One-pixel linear ramp at each edge.
            let cover =
                (params.half_thickness + 0.5 - (y as f64 - centre).abs()).clamp(0.0, 1.0) as f32;
            let v = params.background + (params.foreground - params.background) * cover;
            data[y * w + x] = v;
        }
    }
    if params.noise > 0.0 {
        for v in data.iter_mut() {
            *v = (*v + rng.gen_range(-params.noise..=params.noise)).clamp(0.0, 1.0);
        }
    }
    Tensor::new(&[1, h, w], data).expect("stripe dims are positive")
}

/// Largest deviation of the per-column stripe centroid from its mean, in
/// pixels. Only intensity above `threshold` counts, so background and
/// zero-filled borders do not pull the centroid. Columns without any such
/// intensity are skipped.
pub fn straightness(image: &Tensor, threshold: f32) -> f64 {
    let d = image.dims();
    let (h, w) = (d[d.len() - 2], d[d.len() - 1]);
    let data = image.data();
    let centroids: Vec<f64> = (0..w)
        .filter_map(|x| {
            let (mut m, mut s) = (0.0f64, 0.0f64);
            for y in 0..h {
                let v = (data[y * w + x] - threshold).max(0.0) as f64;
                m += v * y as f64;
                s += v;
            }
            (s > 0.0).then(|| m / s)
        })
        .collect();
    if centroids.is_empty() {
        return 0.0;
    }
    let mean = centroids.iter().sum::<f64>() / centroids.len() as f64;
    centroids
        .iter()
        .fold(0.0f64, |acc, c| acc.max((c - mean).abs()))
}
