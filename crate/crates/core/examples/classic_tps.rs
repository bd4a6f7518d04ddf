//! Solve a thin-plate spline from a bent control lattice and evaluate it.

use tpspp::tps::{make_grid, solve_transform, Point};
use tpspp::tps_pp::map_point_classic;

fn main() -> tpspp::Result<()> {
    let base = make_grid(4, 16)?;
    let offsets = base
        .base()
        .iter()
        .map(|c| Point::new(0.0, 0.2 * (std::f64::consts::PI * c.x).sin()))
        .collect();
    let grid = base.with_offsets(offsets)?;
    let t = solve_transform(&grid)?;

    println!("bias {:?}", t.bias());
    println!("linear {:?}", t.linear());
    for k in [0, 5, 37, 63] {
        let c = grid.base()[k];
        let p = map_point_classic(c, &t);
        let want = grid.regressed_point(k);
        println!(
            "c{k:<2} ({:+.3}, {:+.3}) -> ({:+.6}, {:+.6})  target ({:+.6}, {:+.6})",
            c.x, c.y, p.x, p.y, want.x, want.y
        );
    }
    let mid = map_point_classic(Point::new(0.5, 0.1), &t);
    println!(
        "between control points: (0.5, 0.1) -> ({:+.6}, {:+.6})",
        mid.x, mid.y
    );
    Ok(())
}
