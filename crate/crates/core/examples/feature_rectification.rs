//! Rectify the decoded feature map itself, the way the network uses the
//! predicted control points and attention.

use tpspp::net::{checksum, rectifier_forward, WeightStore, FEATURE_H, FEATURE_W};
use tpspp::synth::{stripe_image, StripeParams};
use tpspp::tensor::Tensor;
use tpspp::tps::{solve_transform, DEFAULT_BETA, DEFAULT_LAMBDA};
use tpspp::tps_pp::{build_sampling_grid, warp, BorderPolicy};

fn main() -> tpspp::Result<()> {
    let mut w = WeightStore::seeded(5);
    // Push every control point down a little through the offset head bias.
    w.insert("aipe.offset2.bias", Tensor::new(&[2], vec![0.0, 0.1])?);
    let img = stripe_image(&StripeParams::default(), 7);
    let out = rectifier_forward(&img, &w)?;

    let t = solve_transform(&out.grid)?.with_weighting(DEFAULT_LAMBDA, DEFAULT_BETA);
    let sampling = build_sampling_grid(&t, &out.attention, FEATURE_H, FEATURE_W)?;
    let rectified = warp(&out.pair.f_d, &sampling, BorderPolicy::Zeros)?;

    println!("translation {:?}", t.bias());
    println!(
        "decoded   {:?} {:?}",
        out.pair.f_d.dims(),
        checksum(&out.pair.f_d)
    );
    println!(
        "rectified {:?} {:?}",
        rectified.dims(),
        checksum(&rectified)
    );
    Ok(())
}
