//! Write a weights file, read it back, and list what it holds.

use tpspp::io::{decode_weights, encode_weights, load_weights, save_weights};
use tpspp::net::WeightStore;

fn main() -> tpspp::Result<()> {
    let w = WeightStore::seeded(42);
    let path = std::env::temp_dir().join("tpspp_example.tpsw");
    save_weights(&w, &path)?;
    let back = load_weights(&path)?;
    assert_eq!(back, w);
    println!(
        "{}: {} tensors, {} parameters",
        path.display(),
        back.len(),
        back.parameter_count()
    );
    for (name, t) in back.iter().take(6) {
        println!("  {name:<22} {:?}", t.dims());
    }

    let mut bytes = encode_weights(&w);
    bytes.truncate(bytes.len() / 2);
    match decode_weights(&bytes) {
        Ok(_) => println!("truncated file decoded?"),
        Err(e) => println!("truncated file: {e}"),
    }
    Ok(())
}
