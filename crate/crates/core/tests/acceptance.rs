//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use tpspp::net::rectifier_parameter_count;
use tpspp::synth::{stripe_image, StripeParams};
use tpspp::tensor::Tensor;
use tpspp::tps::{make_grid, solve_transform};
use tpspp::tps_pp::{build_sampling_grid, warp, AttentionMatrix, BorderPolicy};
use tpspp::verify::{SelfTest, DEFAULT_SEED};

struct Line {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn suite(id: u32, title: &'static str, name: &str, budget: Option<Duration>) -> Line {
    let r = SelfTest::new(DEFAULT_SEED).run(name).expect("suite exists");
    let in_time = budget.is_none_or(|b| r.elapsed < b);
    let timing = match budget {
        Some(b) => format!(
            "; {:.3}s of {:.0}s budget",
            r.elapsed.as_secs_f64(),
            b.as_secs_f64()
        ),
        None => format!("; {:.3}s", r.elapsed.as_secs_f64()),
    };
    Line {
        id,
        title,
        passed: r.passed && in_time,
        detail: format!("{}{timing}", r.detail),
    }
}

/// Row centroid of the bright pixels in every column; returns the largest
/// distance of any column's centroid from the mean centroid.
fn centroid_spread(img: &Tensor) -> f64 {
    let (h, w) = (img.dims()[1], img.dims()[2]);
    let mut cents = Vec::new();
    for x in 0..w {
        let mut num = 0.0;
        let mut den = 0.0;
        for y in 0..h {
            let v = img.data()[y * w + x] as f64;
            if v > 0.5 {
                num += (v - 0.5) * y as f64;
                den += v - 0.5;
            }
        }
        if den > 0.0 {
            cents.push(num / den);
        }
    }
    let mean = cents.iter().sum::<f64>() / cents.len() as f64;
    cents.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max)
}

fn synthetic() -> Line {
    let start = Instant::now();
    let rectify = || {
        let params = StripeParams::default();
        let img = stripe_image(&params, 7);
        let base = make_grid(4, 16).unwrap();
        let offsets = params.counter_offsets(&base);
        let grid = base.with_offsets(offsets).unwrap();
        let t = solve_transform(&grid).unwrap();
        let att = AttentionMatrix::zeros(32 * 128, 64).unwrap();
        let sg = build_sampling_grid(&t, &att, 32, 128).unwrap();
        let out = warp(&img, &sg, BorderPolicy::Zeros).unwrap();
        (img, out)
    };
    let (img, out) = rectify();
    let elapsed = start.elapsed();
    let (_, again) = rectify();
    let (before, after) = (centroid_spread(&img), centroid_spread(&out));
    Line {
        id: 7,
        title: "synthetic rectification",
        passed: after <= 0.5 * before && out == again && elapsed < Duration::from_secs(1),
        detail: format!(
            "spread {before:.3} px -> {after:.3} px (ratio {:.3}); repeat identical: {}; {:.3}s of 1s budget",
            after / before,
            out == again,
            elapsed.as_secs_f64()
        ),
    }
}

fn parameters() -> Line {
    let n = rectifier_parameter_count();
    Line {
        id: 6,
        title: "parameter-count bracket",
        passed: (200_000..=1_000_000).contains(&n),
        detail: format!("{n} parameters in [200000, 1000000]"),
    }
}

fn full_selftest() -> Line {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let reports = pool.install(|| SelfTest::new(DEFAULT_SEED).run_all());
    let elapsed = start.elapsed();
    let failed: Vec<_> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    Line {
        id: 10,
        title: "full selftest on one thread",
        passed: failed.is_empty() && elapsed < Duration::from_secs(60),
        detail: format!(
            "{} suites, failed {:?}, {:.3}s of 60s budget",
            reports.len(),
            failed,
            elapsed.as_secs_f64()
        ),
    }
}

fn main() {
    let five = Some(Duration::from_secs(5));
    let lines = vec![
        suite(
            1,
            "lambda = 0 reduces to classic TPS",
            "lambda_zero_reduction",
            five,
        ),
        suite(2, "interpolation exactness", "interpolation", five),
        suite(3, "affine exactness", "affine_exactness", None),
        suite(4, "solver oracle", "solver_oracle", None),
        suite(5, "shape contract", "shape_contract", None),
        parameters(),
        synthetic(),
        suite(8, "warp correctness", "warp_correctness", None),
        suite(9, "persistence", "persistence", None),
        full_selftest(),
    ];
    for l in &lines {
        println!(
            "criterion {:>2} {:<36} {}  {}",
            l.id,
            l.title,
            if l.passed { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!(
        "{} of {} criteria passed",
        lines.len() - failed,
        lines.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
