//! Straighten the synthetic stripe with hand-placed control points and
//! write before/after PGMs.
//!
//!     cargo run --example warp_image -- [OUT_DIR]

use std::path::PathBuf;

use tpspp::io::save_image;
use tpspp::synth::{straightness, stripe_image, StripeParams};
use tpspp::tps::{make_grid, solve_transform};
use tpspp::tps_pp::{build_sampling_grid, warp, AttentionMatrix, BorderPolicy};

fn main() -> tpspp::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let params = StripeParams::default();
    let img = stripe_image(&params, 7);

    let base = make_grid(4, 16)?;
    let offsets = params.counter_offsets(&base);
    let grid = base.with_offsets(offsets)?;
    let t = solve_transform(&grid)?;
    let (h, w) = (params.height, params.width);
    let sampling = build_sampling_grid(&t, &AttentionMatrix::zeros(h * w, grid.len())?, h, w)?;
    let out = warp(&img, &sampling, BorderPolicy::Zeros)?;

    println!("straightness before {:.3} px", straightness(&img, 0.5));
    println!("straightness after  {:.3} px", straightness(&out, 0.5));
    save_image(&img, dir.join("stripe.pgm"))?;
    save_image(&out, dir.join("stripe_rectified.pgm"))?;
    println!(
        "wrote {}/stripe.pgm and stripe_rectified.pgm",
        dir.display()
    );
    Ok(())
}
