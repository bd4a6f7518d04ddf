//! One forward pass of the rectification network on a synthetic image.

use tpspp::net::{checksum, rectifier_forward, rectifier_parameter_count, WeightStore};
use tpspp::synth::{stripe_image, StripeParams};

fn main() -> tpspp::Result<()> {
    let w = WeightStore::seeded(1);
    let img = stripe_image(&StripeParams::default(), 7);
    let out = rectifier_forward(&img, &w)?;

    println!("rectifier parameters: {}", rectifier_parameter_count());
    println!("stored parameters:    {}", w.parameter_count());
    for (name, t) in [
        ("f1", &out.features.f1),
        ("f2", &out.features.f2),
        ("f3", &out.features.f3),
    ] {
        println!("{name} {:?}", t.dims());
    }
    println!(
        "f_e {:?} checksum {:?}",
        out.pair.f_e.dims(),
        checksum(&out.pair.f_e)
    );
    println!(
        "f_d {:?} checksum {:?}",
        out.pair.f_d.dims(),
        checksum(&out.pair.f_d)
    );
    println!(
        "attention {}x{}, max |a| {:.3e}",
        out.attention.m_locations(),
        out.attention.k_points(),
        out.attention.max_abs()
    );
    // Seeded weights keep the offset head at zero, so the lattice is unmoved.
    let moved = out
        .grid
        .offsets()
        .iter()
        .filter(|o| o.x != 0.0 || o.y != 0.0)
        .count();
    println!("{} control points, {moved} moved", out.grid.len());
    Ok(())
}
