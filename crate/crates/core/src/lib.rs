//! Thin-plate-spline rectification with attention-weighted kernels.
//!
//! The crate covers the spline itself ([`tps`]), the attention-enhanced
//! evaluation and sampling ([`tps_pp`]), a forward-only feature network that
//! predicts control points and attention ([`net`]), file formats ([`io`]),
//! and the command-line front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod io;
pub mod net;
pub mod synth;
pub mod tensor;
pub mod tps;
pub mod tps_pp;
pub mod verify;

pub use error::{Error, Result};
