//! Persistence: the `TPSW` weight container, Netpbm images, and JSON
//! control-point documents.

mod grid_json;
mod image;
mod weights;

pub use grid_json::{
    export_grid_json, grid_from_json, grid_to_json, import_grid_json, sampling_grid_from_json,
    sampling_grid_to_json, GridDocument,
};
pub use image::{decode_netpbm, encode_pgm, encode_ppm, load_image, save_image, save_rgb_image};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, MAGIC, VERSION};
