//! Export control points with attention to JSON and import them again.

use tpspp::io::{grid_from_json, grid_to_json, GridDocument};
use tpspp::tps::{make_grid, Point};
use tpspp::tps_pp::AttentionMatrix;

fn main() -> tpspp::Result<()> {
    let grid = make_grid(2, 3)?.with_offsets(vec![Point::new(0.05, -0.1); 6])?;
    let scores = (0..4 * 6).map(|i| (i as f64 - 12.0) / 20.0).collect();
    let doc = GridDocument::new(grid).with_attention(AttentionMatrix::new(4, 6, scores)?);
    let text = grid_to_json(&doc);
    println!("{text}");

    let back = grid_from_json(&text)?;
    println!(
        "roundtrip rows {} cols {} lambda {}",
        back.grid.rows(),
        back.grid.cols(),
        back.lambda
    );

    let bad = text.replacen("-0.6", "1.5", 1);
    if let Err(e) = grid_from_json(&bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
