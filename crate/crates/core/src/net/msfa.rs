//! Multi-scale feature aggregation: align three backbone maps to
//! `64×16×64`, concatenate, and run the encoder-decoder.
//!
//! | layer | op                          | output  |
//! |-------|-----------------------------|---------|
//! | 1     | conv 192→64, 1×1, s1        | 16×64   |
//! | 2     | conv 64, 3×3, s2            | 8×32    |
//! | 3     | conv 64, 3×3, s2            | 4×16    |
//! | 4     | CBAM                        | 4×16    |
//! | 5     | ×2 nearest + conv 64, 3×3   | 8×32    |
//! | 6     | ×2 nearest + conv 64, 3×3   | 16×64   |
//! | 7     | conv 64, 3×3, s1            | 16×64   |
//!
//! ReLU follows every conv except layer 7.

use super::{
    FeatureBundle, WeightStore, CBAM_KERNEL, CBAM_REDUCTION, CHANNELS, FEATURE_H, FEATURE_W,
};
use crate::error::{Error, Result};
use crate::tensor::{
    avg_pool2d, concat, reduce_max, reduce_mean, relu, sigmoid, upsample_x2, Tensor,
};

/// Encoded (`D×4×16`) and decoded (`D×16×64`) features.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDecodedPair {
    pub f_e: Tensor,
    pub f_d: Tensor,
}

impl EncodedDecodedPair {
    pub fn channels(&self) -> usize {
        self.f_e.dims()[0]
    }
}

fn align(w: &WeightStore, name: &str, f: &Tensor) -> Result<Tensor> {
    let (_, h, wd) = f.chw()?;
    if h % FEATURE_H != 0 || wd % FEATURE_W != 0 || h / FEATURE_H != wd / FEATURE_W {
        return Err(Error::shape(format!(
            "{name}: cannot reduce {h}×{wd} to {FEATURE_H}×{FEATURE_W}"
        )));
    }
    let factor = h / FEATURE_H;
    let pooled = if factor > 1 {
        avg_pool2d(f, factor)?
    } else {
        f.clone()
    };
    Ok(relu(&w.conv(name, &pooled, CHANNELS, 1, 1)?))
}

pub fn msfa_forward(bundle: &FeatureBundle, w: &WeightStore) -> Result<EncodedDecodedPair> {
    let a1 = align(w, "msfa.align1", &bundle.f1)?;
    let a2 = align(w, "msfa.align2", &bundle.f2)?;
    let a3 = align(w, "msfa.align3", &bundle.f3)?;
    let fused = concat(&concat(&a1, &a2, 0)?, &a3, 0)?;

    let x = relu(&w.conv("msfa.layer1", &fused, CHANNELS, 1, 1)?);
    let x = relu(&w.conv("msfa.layer2", &x, CHANNELS, 3, 2)?);
    let x = relu(&w.conv("msfa.layer3", &x, CHANNELS, 3, 2)?);
    let f_e = cbam_forward(&x, w)?;
    let x = relu(&w.conv("msfa.layer5", &upsample_x2(&f_e)?, CHANNELS, 3, 1)?);
    let x = relu(&w.conv("msfa.layer6", &upsample_x2(&x)?, CHANNELS, 3, 1)?);
    let f_d = w.conv("msfa.layer7", &x, CHANNELS, 3, 1)?;
    Ok(EncodedDecodedPair { f_e, f_d })
}

/// Channel gate then spatial gate, parameters under `msfa.cbam.*`.
pub fn cbam_forward(x: &Tensor, w: &WeightStore) -> Result<Tensor> {
    let (c, h, wd) = x.chw()?;
    if c % CBAM_REDUCTION != 0 {
        return Err(Error::shape(format!(
            "CBAM needs channels divisible by {CBAM_REDUCTION}, got {c}"
        )));
    }
    let hidden = c / CBAM_REDUCTION;
    let flat = x.reshape(&[c, h * wd])?;
    let avg = reduce_mean(&flat, 1)?.into_reshape(&[1, c])?;
    let max = reduce_max(&flat, 1)?.into_reshape(&[1, c])?;
    let mlp = |v: &Tensor| -> Result<Tensor> {
        let z = relu(&w.linear("msfa.cbam.mlp1", v, hidden)?);
        w.linear("msfa.cbam.mlp2", &z, c)
    };
    let channel_gate = sigmoid(&mlp(&avg)?.add(&mlp(&max)?)?);

    let mut gated = x.data().to_vec();
    for (plane, &g) in gated.chunks_exact_mut(h * wd).zip(channel_gate.data()) {
        plane.iter_mut().for_each(|v| *v *= g);
    }
    let gated = Tensor::new(&[c, h, wd], gated)?;

    let mean_map = reduce_mean(&gated, 0)?.into_reshape(&[1, h, wd])?;
    let max_map = reduce_max(&gated, 0)?.into_reshape(&[1, h, wd])?;
    let pooled = concat(&mean_map, &max_map, 0)?;
    let spatial = sigmoid(&w.conv("msfa.cbam.spatial", &pooled, 1, CBAM_KERNEL, 1)?);

    let mut out = gated.into_data();
    for plane in out.chunks_exact_mut(h * wd) {
        plane
            .iter_mut()
            .zip(spatial.data())
            .for_each(|(v, &s)| *v *= s);
    }
    Tensor::new(&[c, h, wd], out)
}
