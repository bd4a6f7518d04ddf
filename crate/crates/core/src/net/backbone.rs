//! Stand-in feature extractor.
//!
//! Three 3×3 conv + ReLU stages: `1→32` at stride 1, `32→64` at stride 2,
//! `64→96` at stride 1. On a `1×32×128` input this yields maps of
//! `32×32×128`, `64×16×64` and `96×16×64`, the shapes the rectifier expects
//! from the first three blocks of a text-recognition backbone.

use super::{WeightStore, BACKBONE_CHANNELS, INPUT_H, INPUT_W};
use crate::error::{Error, Result};
use crate::tensor::{relu, Tensor};

/// Outputs of the three backbone stages, channels-first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub f1: Tensor,
    pub f2: Tensor,
    pub f3: Tensor,
}

pub fn toy_backbone(image: &Tensor, w: &WeightStore) -> Result<FeatureBundle> {
    if image.dims() != [1, INPUT_H, INPUT_W] {
        return Err(Error::shape(format!(
            "backbone expects a 1×{INPUT_H}×{INPUT_W} image, got {:?}",
            image.dims()
        )));
    }
    let [c1, c2, c3] = BACKBONE_CHANNELS;
    let f1 = relu(&w.conv("backbone.conv1", image, c1, 3, 1)?);
    let f2 = relu(&w.conv("backbone.conv2", &f1, c2, 3, 2)?);
    let f3 = relu(&w.conv("backbone.conv3", &f2, c3, 3, 1)?);
    Ok(FeatureBundle { f1, f2, f3 })
}
