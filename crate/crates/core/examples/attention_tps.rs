//! Attention-weighted kernel terms: the same transform evaluated with
//! different attention rows and weightings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpspp::tps::{make_grid, solve_transform, Point};
use tpspp::tps_pp::{basis_vector, map_point, map_point_classic};

fn main() -> tpspp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = make_grid(4, 16)?;
    let offsets = (0..base.len())
        .map(|_| Point::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
        .collect();
    let grid = base.with_offsets(offsets)?;
    let p = Point::new(0.3, -0.2);
    let row: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-0.9..0.9)).collect();

    for (lambda, beta) in [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0), (0.5, 0.5)] {
        let t = solve_transform(&grid)?.with_weighting(lambda, beta);
        let q = map_point(p, &t, &row)?;
        println!(
            "lambda {lambda:.1} beta {beta:.1}: ({:+.6}, {:+.6})",
            q.x, q.y
        );
    }
    let t = solve_transform(&grid)?.with_weighting(0.0, 1.0);
    let q = map_point_classic(p, &t);
    println!("classic:                ({:+.6}, {:+.6})", q.x, q.y);

    let f = basis_vector(p, &t, &row)?;
    println!("basis has {} entries, first three {:?}", f.len(), &f[..3]);
    Ok(())
}
