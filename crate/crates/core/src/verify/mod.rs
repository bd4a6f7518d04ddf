//! Self-test suites. Each one checks an engine property against an
//! independent oracle or a closed-form expectation and reports pass/fail.

pub mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{
    decode_netpbm, decode_weights, encode_pgm, encode_weights, grid_from_json, grid_to_json,
    GridDocument,
};
use crate::net::{rectifier_forward, rectifier_parameter_count, WeightStore, INPUT_H, INPUT_W};
use crate::synth::{straightness, stripe_image, StripeParams};
use crate::tensor::{conv2d, linalg::residual_inf, softmax, Matrix, Tensor};
use crate::tps::{
    assemble_system, build_kernel_matrix, make_grid, solve_transform_with_kernel, thin_plate,
    ControlPointGrid, Point, RadialFn, TpsTransform,
};
use crate::tps_pp::{
    build_sampling_grid, map_point, map_point_classic, warp, AttentionMatrix, BorderPolicy,
    SamplingGrid,
};

pub const DEFAULT_SEED: u64 = 20230;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Outcome = std::result::Result<String, String>;
type SuiteFn = fn(&SelfTest) -> Outcome;

const SUITES: &[(&str, SuiteFn)] = &[
    ("lambda_zero_reduction", SelfTest::lambda_zero_reduction),
    ("interpolation", SelfTest::interpolation),
    ("affine_exactness", SelfTest::affine_exactness),
    ("solver_oracle", SelfTest::solver_oracle),
    ("shape_contract", SelfTest::shape_contract),
    ("parameter_count", SelfTest::parameter_count),
    ("synthetic_rectification", SelfTest::synthetic_rectification),
    ("warp_correctness", SelfTest::warp_correctness),
    ("persistence", SelfTest::persistence),
    ("conv_oracle", SelfTest::conv_oracle),
    ("softmax", SelfTest::softmax),
    ("kernel_symmetry", SelfTest::kernel_symmetry),
    ("attention_inertness", SelfTest::attention_inertness),
    ("continuity", SelfTest::continuity),
    ("determinism", SelfTest::determinism),
];

/// Suite runner. The radial function is swappable so a deliberately broken
/// kernel can be shown to fail the interpolation suite.
#[derive(Debug, Clone, Copy)]
pub struct SelfTest {
    pub seed: u64,
    pub kernel: RadialFn,
}

impl Default for SelfTest {
    fn default() -> Self {
        SelfTest::new(DEFAULT_SEED)
    }
}

/// Thin-plate kernel with `U(1) = 1` instead of `0`: `r²(ln r² + 1)`.
pub fn corrupted_thin_plate(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        let r2 = r * r;
        r2 * (r2.ln() + 1.0)
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_grid(rng: &mut impl Rng, rows: usize, cols: usize, spread: f64) -> ControlPointGrid {
    let g = make_grid(rows, cols).expect("positive lattice");
    let offsets = (0..g.len())
        .map(|_| {
            Point::new(
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
            )
        })
        .collect();
    g.with_offsets(offsets).expect("finite offsets")
}

fn random_row(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-0.99..0.99)).collect()
}

fn random_point(rng: &mut impl Rng, extent: f64) -> Point {
    Point::new(
        rng.gen_range(-extent..extent),
        rng.gen_range(-extent..extent),
    )
}

fn pairs(points: &[Point]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.x, p.y)).collect()
}

impl SelfTest {
    pub fn new(seed: u64) -> Self {
        SelfTest {
            seed,
            kernel: thin_plate,
        }
    }

    pub fn with_kernel(mut self, kernel: RadialFn) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn suite_names() -> impl Iterator<Item = &'static str> {
        SUITES.iter().map(|(n, _)| *n)
    }

    /// Runs one suite by name. A panicking suite counts as a failure.
    pub fn run(&self, name: &str) -> Option<SuiteReport> {
        let &(name, f) = SUITES.iter().find(|(n, _)| *n == name)?;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(self)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Some(SuiteReport {
            name,
            passed,
            detail,
            elapsed,
        })
    }

    pub fn run_all(&self) -> Vec<SuiteReport> {
        Self::suite_names().filter_map(|n| self.run(n)).collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn solve(&self, grid: &ControlPointGrid) -> std::result::Result<TpsTransform, String> {
        solve_transform_with_kernel(grid, self.kernel).map_err(|e| e.to_string())
    }

    fn lambda_zero_reduction(&self) -> Outcome {
        let mut rng = self.rng(1);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let rows = rng.gen_range(2..=5);
            let cols = rng.gen_range(2..=16);
            let grid = random_grid(&mut rng, rows, cols, 0.3);
            let t = self.solve(&grid)?.with_weighting(0.0, 1.0);
            let reference = oracle::ClassicTps::fit(&pairs(grid.base()), &pairs(&grid.regressed()))
                .ok_or("oracle could not fit a random grid")?;
            for _ in 0..100 {
                let p = random_point(&mut rng, 1.2);
                let row = random_row(&mut rng, grid.len());
                let got = map_point(p, &t, &row).map_err(|e| e.to_string())?;
                let (ex, ey) = reference.eval(p.x, p.y);
                worst = worst.max((got.x - ex).abs()).max((got.y - ey).abs());
            }
        }
        check(
            worst <= 1e-9,
            format!("max deviation {worst:.3e} (tol 1e-9)"),
        )
    }

    fn interpolation(&self) -> Outcome {
        let mut rng = self.rng(2);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let grid = random_grid(&mut rng, 4, 16, 0.3);
            let t = self.solve(&grid)?;
            let centers = pairs(t.centers());
            let (tx, ty) = (t.t_matrix().row(0), t.t_matrix().row(1));
            for (k, c) in grid.base().iter().enumerate() {
                let target = grid.regressed_point(k);
                let x = oracle::eval_affine_plus_kernel(tx, &centers, c.x, c.y);
                let y = oracle::eval_affine_plus_kernel(ty, &centers, c.x, c.y);
                worst = worst.max((x - target.x).abs()).max((y - target.y).abs());
            }
        }
        check(
            worst <= 1e-6,
            format!("max residual {worst:.3e} (tol 1e-6)"),
        )
    }

    fn affine_exactness(&self) -> Outcome {
        let mut rng = self.rng(3);
        let (mut worst_w, mut worst_map, mut worst_coef) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..50 {
            let m = [
                [1.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                [rng.gen_range(-0.5..0.5), 1.0 + rng.gen_range(-0.5..0.5)],
            ];
            let b = random_point(&mut rng, 0.3);
            let affine = |p: Point| {
                Point::new(
                    m[0][0] * p.x + m[0][1] * p.y + b.x,
                    m[1][0] * p.x + m[1][1] * p.y + b.y,
                )
            };
            let base = make_grid(4, 16).map_err(|e| e.to_string())?;
            let offsets = base.base().iter().map(|&p| affine(p) - p).collect();
            let grid = base.with_offsets(offsets).map_err(|e| e.to_string())?;
            let t = self.solve(&grid)?;
            for axis in 0..2 {
                worst_w = t
                    .kernel_weights(axis)
                    .iter()
                    .fold(worst_w, |a, v| a.max(v.abs()));
            }
            let lin = t.linear();
            for i in 0..2 {
                for j in 0..2 {
                    worst_coef = worst_coef.max((lin[i][j] - m[i][j]).abs());
                }
            }
            worst_coef = worst_coef
                .max((t.bias().x - b.x).abs())
                .max((t.bias().y - b.y).abs());
            for _ in 0..20 {
                let p = random_point(&mut rng, 1.0);
                let got = map_point_classic(p, &t);
                let want = affine(p);
                worst_map = worst_map
                    .max((got.x - want.x).abs())
                    .max((got.y - want.y).abs());
            }
        }
        check(
            worst_w <= 1e-6 && worst_map <= 1e-6 && worst_coef <= 1e-6,
            format!("kernel weights {worst_w:.3e}, map {worst_map:.3e}, coefficients {worst_coef:.3e} (tol 1e-6)"),
        )
    }

    fn solver_oracle(&self) -> Outcome {
        let mut rng = self.rng(4);
        let mut worst = 0.0f64;
        let mut compared = 0;
        for i in 0..100 {
            let m = if i % 2 == 0 {
                oracle::random_well_conditioned(10, &mut rng)
            } else {
                Matrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0))
            };
            let rhs = Matrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
            let Some(want) = oracle::gauss_full_pivot(&m, &rhs) else {
                continue;
            };
            let got = m.solve(&rhs).map_err(|e| e.to_string())?;
            compared += 1;
            for (a, b) in got.data().iter().zip(want.data()) {
                worst = worst.max((a - b).abs());
            }
        }
        let mut worst_ratio = 0.0f64;
        for _ in 0..20 {
            let grid = random_grid(&mut rng, 4, 16, 0.3);
            let (system, rhs) = assemble_system(&grid, thin_plate);
            let x = system.solve(&rhs).map_err(|e| e.to_string())?;
            let r = residual_inf(&system, &x, &rhs).map_err(|e| e.to_string())?;
            worst_ratio = worst_ratio.max(r / (1e-6 * (1.0 + rhs.max_abs())));
        }
        check(
            compared >= 95 && worst <= 1e-8 && worst_ratio <= 1.0,
            format!("{compared} systems, max deviation {worst:.3e} (tol 1e-8); K=64 residual at {worst_ratio:.3e} of bound"),
        )
    }

    fn shape_contract(&self) -> Outcome {
        let mut rng = self.rng(5);
        let w = WeightStore::seeded(self.seed);
        let mut worst_a = 0.0f64;
        for scale in [1.0f32, 1e3] {
            let img = Tensor::from_fn(&[1, INPUT_H, INPUT_W], |_| rng.gen_range(0.0..scale))
                .map_err(|e| e.to_string())?;
            let out = rectifier_forward(&img, &w).map_err(|e| e.to_string())?;
            let shapes = [
                (out.pair.f_e.dims().to_vec(), vec![64, 4, 16]),
                (out.pair.f_d.dims().to_vec(), vec![64, 16, 64]),
                (vec![out.grid.len(), 2], vec![64, 2]),
                (
                    vec![out.attention.m_locations(), out.attention.k_points()],
                    vec![1024, 64],
                ),
            ];
            for (got, want) in shapes {
                if got != want {
                    return Err(format!("shape {got:?}, expected {want:?}"));
                }
            }
            worst_a = worst_a.max(out.attention.max_abs());
        }
        check(
            worst_a < 1.0,
            format!("all shapes match; max |A| = {worst_a}"),
        )
    }

    fn parameter_count(&self) -> Outcome {
        let n = rectifier_parameter_count();
        check(
            (200_000..=1_000_000).contains(&n),
            format!("{n} parameters (bracket [2e5, 1e6])"),
        )
    }

    fn synthetic_rectification(&self) -> Outcome {
        let params = StripeParams::default();
        let run = || -> std::result::Result<(f64, f64, Tensor), String> {
            let img = stripe_image(&params, self.seed);
            let base = make_grid(4, 16).map_err(|e| e.to_string())?;
            let offsets = params.counter_offsets(&base);
            let grid = base.with_offsets(offsets).map_err(|e| e.to_string())?;
            let t = self.solve(&grid)?;
            let att = AttentionMatrix::zeros(params.height * params.width, grid.len())
                .map_err(|e| e.to_string())?;
            let sg = build_sampling_grid(&t, &att, params.height, params.width)
                .map_err(|e| e.to_string())?;
            let out = warp(&img, &sg, BorderPolicy::Zeros).map_err(|e| e.to_string())?;
            Ok((straightness(&img, 0.5), straightness(&out, 0.5), out))
        };
        let (before, after, out) = run()?;
        let (_, _, again) = run()?;
        if out != again {
            return Err("two runs with the same seed differ".into());
        }
        check(
            after <= 0.5 * before,
            format!(
                "deviation {before:.3} px -> {after:.3} px (ratio {:.3}, need <= 0.5)",
                after / before
            ),
        )
    }

    fn warp_correctness(&self) -> Outcome {
        let mut rng = self.rng(8);
        let mut worst_id = 0.0f64;
        let mut worst = 0.0f64;
        for i in 0..100 {
            let (c, h, w) = (
                rng.gen_range(1..=3),
                rng.gen_range(2..=20),
                rng.gen_range(2..=20),
            );
            let src = Tensor::from_fn(&[c, h, w], |_| rng.gen_range(0.0..1.0))
                .map_err(|e| e.to_string())?;
            let border = if i % 2 == 0 {
                BorderPolicy::Zeros
            } else {
                BorderPolicy::Clamp
            };
            let id =
                warp(&src, &SamplingGrid::identity(h, w), border).map_err(|e| e.to_string())?;
            for (a, b) in id.data().iter().zip(src.data()) {
                worst_id = worst_id.max((a - b).abs() as f64);
            }
            let (oh, ow) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
            let coords: Vec<Point> = (0..oh * ow).map(|_| random_point(&mut rng, 1.3)).collect();
            let grid = SamplingGrid::new(oh, ow, coords).map_err(|e| e.to_string())?;
            let out = warp(&src, &grid, border).map_err(|e| e.to_string())?;
            for ch in 0..c {
                for (idx, p) in grid.coords.iter().enumerate() {
                    let want = oracle::bilinear(&src, ch, p.x, p.y, border == BorderPolicy::Clamp);
                    let got = out.data()[ch * oh * ow + idx] as f64;
                    worst = worst.max((got - want).abs());
                }
            }
        }
        check(
            worst_id <= 1e-6 && worst <= 1e-6,
            format!("identity {worst_id:.3e}, bilinear oracle {worst:.3e} (tol 1e-6)"),
        )
    }

    fn persistence(&self) -> Outcome {
        let mut rng = self.rng(9);

        let store = WeightStore::seeded(self.seed);
        let tpsw = encode_weights(&store);
        let back = decode_weights(&tpsw).map_err(|e| e.to_string())?;
        if back != store || encode_weights(&back) != tpsw {
            return Err("TPSW roundtrip not bit-identical".into());
        }
        let (h, w) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let mut pgm = format!("P5\n{w} {h}\n255\n").into_bytes();
        pgm.extend((0..h * w).map(|_| rng.gen::<u8>()));
        let decoded = decode_netpbm(&pgm).map_err(|e| e.to_string())?;
        if encode_pgm(&decoded).map_err(|e| e.to_string())? != pgm {
            return Err("PGM roundtrip not bit-identical".into());
        }
        let doc = GridDocument::new(random_grid(&mut rng, 4, 16, 0.3));
        let json = grid_to_json(&doc);
        let back = grid_from_json(&json).map_err(|e| e.to_string())?;
        let drift = back
            .grid
            .offsets()
            .iter()
            .zip(doc.grid.offsets())
            .fold(0.0f64, |m, (a, b)| {
                m.max((a.x - b.x).abs()).max((a.y - b.y).abs())
            });
        if drift > 1e-9
            || back.grid.rows() != doc.grid.rows()
            || back.grid.cols() != doc.grid.cols()
        {
            return Err(format!("grid JSON roundtrip drifts by {drift:.3e}"));
        }

        // Small store so truncations land in every field, not just payload.
        let mut small = WeightStore::new();
        small.insert(
            "a.weight",
            Tensor::new(&[2, 2], vec![1.0, -2.0, 0.5, 3.0]).map_err(|e| e.to_string())?,
        );
        small.insert(
            "a.bias",
            Tensor::new(&[2], vec![0.1, 0.2]).map_err(|e| e.to_string())?,
        );
        let valid = [encode_weights(&small), pgm, json.into_bytes()];

        let mut rejected = 0;
        for i in 0..1000 {
            let which = i % 3;
            let mut bytes = valid[which].clone();
            match rng.gen_range(0..3) {
                0 => bytes.truncate(rng.gen_range(0..bytes.len())),
                1 => {
                    for _ in 0..rng.gen_range(1..=4) {
                        let at = rng.gen_range(0..bytes.len());
                        bytes[at] = rng.gen();
                    }
                }
                _ => {
                    let at = rng.gen_range(0..bytes.len());
                    bytes.truncate(at);
                    bytes.extend((0..rng.gen_range(1..16)).map(|_| rng.gen::<u8>()));
                }
            }
            let outcome = catch_unwind(|| match which {
                0 => decode_weights(&bytes).is_err(),
                1 => decode_netpbm(&bytes).is_err(),
                _ => std::str::from_utf8(&bytes)
                    .map(|s| grid_from_json(s).is_err())
                    .unwrap_or(true),
            });
            match outcome {
                Ok(true) => rejected += 1,
                Ok(false) => {}
                Err(p) => {
                    return Err(format!(
                        "decoder panicked on fuzz case {i}: {}",
                        panic_message(&p)
                    ))
                }
            }
        }
        Ok(format!("roundtrips bit-identical; 1000 fuzz cases, {rejected} rejected with typed errors, no panics"))
    }

    fn conv_oracle(&self) -> Outcome {
        let mut rng = self.rng(10);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (c, o) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let k: usize = rng.gen_range(1..=3);
            let pad = rng.gen_range(0..=k / 2 + 1);
            let h = rng.gen_range(k.saturating_sub(2 * pad).max(1)..=8);
            let w = rng.gen_range(k.saturating_sub(2 * pad).max(1)..=8);
            let stride = rng.gen_range(1..=2);
            let mut t = |dims: &[usize]| {
                Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0)).expect("positive dims")
            };
            let (x, kern, bias) = (t(&[c, h, w]), t(&[o, c, k, k]), t(&[o]));
            let got = conv2d(&x, &kern, &bias, stride, pad).map_err(|e| e.to_string())?;
            let want = oracle::conv2d(&x, &kern, &bias, stride, pad);
            if got.len() != want.len() {
                return Err(format!("{} outputs, oracle has {}", got.len(), want.len()));
            }
            for (a, b) in got.data().iter().zip(&want) {
                worst = worst.max((*a as f64 - b).abs());
            }
        }
        check(
            worst <= 1e-6,
            format!("max deviation {worst:.3e} (tol 1e-6)"),
        )
    }

    fn softmax(&self) -> Outcome {
        let mut rng = self.rng(11);
        let mut worst = 0.0f64;
        for i in 0..100 {
            let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let spread = if i % 4 == 0 { 200.0 } else { 5.0 };
            let x = Tensor::from_fn(&[r, c], |_| rng.gen_range(-spread..spread))
                .map_err(|e| e.to_string())?;
            let axis = i % 2;
            let s = softmax(&x, axis).map_err(|e| e.to_string())?;
            if let Some(v) = s.data().iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return Err(format!("entry {v} outside (0, 1]"));
            }
            let d = s.data();
            let sums: Vec<f64> = if axis == 0 {
                (0..c)
                    .map(|j| (0..r).map(|i| d[i * c + j] as f64).sum())
                    .collect()
            } else {
                (0..r)
                    .map(|i| d[i * c..(i + 1) * c].iter().map(|&v| v as f64).sum())
                    .collect()
            };
            worst = sums.iter().fold(worst, |a, s| a.max((s - 1.0).abs()));
        }
        check(
            worst <= 1e-6,
            format!("max |sum - 1| {worst:.3e} (tol 1e-6)"),
        )
    }

    fn kernel_symmetry(&self) -> Outcome {
        let mut rng = self.rng(12);
        for _ in 0..20 {
            let (rows, cols) = (rng.gen_range(2..=6), rng.gen_range(2..=16));
            let grid = random_grid(&mut rng, rows, cols, 0.3);
            let s = build_kernel_matrix(&grid);
            let m = s.matrix();
            for i in 0..m.rows() {
                if m[(i, i)] != 0.0 {
                    return Err(format!("diagonal entry {i} is {}", m[(i, i)]));
                }
                for j in 0..i {
                    if m[(i, j)].to_bits() != m[(j, i)].to_bits() {
                        return Err(format!("S[{i},{j}] != S[{j},{i}]"));
                    }
                }
            }
            let a = self.solve(&grid)?;
            let b = self.solve(&grid)?;
            if a.t_matrix()
                .data()
                .iter()
                .zip(b.t_matrix().data())
                .any(|(x, y)| x.to_bits() != y.to_bits())
            {
                return Err("repeated solve is not bit-identical".into());
            }
        }
        Ok("symmetric, zero diagonal, repeat solves bit-identical".into())
    }

    fn attention_inertness(&self) -> Outcome {
        let mut rng = self.rng(13);
        let mut worst = 0.0f64;
        for i in 0..50 {
            let base = make_grid(4, 16).map_err(|e| e.to_string())?;
            let grid = if i == 0 {
                base
            } else {
                let m = [
                    [1.0 + rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
                    [rng.gen_range(-0.3..0.3), 1.0],
                ];
                let b = random_point(&mut rng, 0.2);
                let offsets = base
                    .base()
                    .iter()
                    .map(|&p| {
                        Point::new(
                            m[0][0] * p.x + m[0][1] * p.y + b.x - p.x,
                            m[1][0] * p.x + b.y,
                        )
                    })
                    .collect();
                base.with_offsets(offsets).map_err(|e| e.to_string())?
            };
            let t = self.solve(&grid)?;
            for _ in 0..20 {
                let p = random_point(&mut rng, 1.0);
                let plain = map_point(p, &t, &vec![0.0; grid.len()]).map_err(|e| e.to_string())?;
                let row = random_row(&mut rng, grid.len());
                let q = map_point(p, &t, &row).map_err(|e| e.to_string())?;
                worst = worst.max((q.x - plain.x).abs()).max((q.y - plain.y).abs());
            }
        }
        check(
            worst <= 1e-7,
            format!("max attention-induced change {worst:.3e} (tol 1e-7)"),
        )
    }

    fn continuity(&self) -> Outcome {
        const EPS: f64 = 1e-4;
        let mut rng = self.rng(14);
        let mut worst = 0.0f64;
        let bound = 10.0 * EPS * 64.0;
        for _ in 0..20 {
            let grid = random_grid(&mut rng, 4, 16, 0.3);
            let t = self.solve(&grid)?;
            let mut offsets = grid.offsets().to_vec();
            let k = rng.gen_range(0..offsets.len());
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            offsets[k] = offsets[k] + Point::new(EPS * angle.cos(), EPS * angle.sin());
            let nudged = grid
                .clone()
                .with_offsets(offsets)
                .map_err(|e| e.to_string())?;
            let u = self.solve(&nudged)?;
            for _ in 0..50 {
                let p = random_point(&mut rng, 1.0);
                let row = random_row(&mut rng, grid.len());
                let a = map_point(p, &t, &row).map_err(|e| e.to_string())?;
                let b = map_point(p, &u, &row).map_err(|e| e.to_string())?;
                worst = worst.max(a.distance(b));
            }
        }
        check(
            worst <= bound,
            format!("max shift {worst:.3e} for eps 1e-4 (bound {bound:.1e})"),
        )
    }

    fn determinism(&self) -> Outcome {
        let w = WeightStore::seeded(self.seed);
        let img = stripe_image(&StripeParams::default(), self.seed);
        if img != stripe_image(&StripeParams::default(), self.seed) {
            return Err("stripe image differs between runs".into());
        }
        let a = rectifier_forward(&img, &w).map_err(|e| e.to_string())?;
        let b = rectifier_forward(&img, &w).map_err(|e| e.to_string())?;
        let same = a.pair.f_d == b.pair.f_d
            && a.pair.f_e == b.pair.f_e
            && a.grid == b.grid
            && a.attention == b.attention;
        check(same, "repeated forwards bit-identical".into())
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_are_unique() {
        let mut names: Vec<_> = SelfTest::suite_names().collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
        assert!(SelfTest::default().run("no_such_suite").is_none());
    }

    #[test]
    fn corrupted_kernel_breaks_interpolation() {
        assert_eq!(corrupted_thin_plate(1.0), 1.0);
        let report = SelfTest::default()
            .with_kernel(corrupted_thin_plate)
            .run("interpolation")
            .unwrap();
        assert!(!report.passed, "{}", report.detail);
    }

    #[test]
    fn cheap_suites_pass() {
        for name in [
            "parameter_count",
            "kernel_symmetry",
            "softmax",
            "conv_oracle",
            "continuity",
        ] {
            let r = SelfTest::default().run(name).unwrap();
            assert!(r.passed, "{name}: {}", r.detail);
        }
    }
}
