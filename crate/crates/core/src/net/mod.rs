//! Forward-only rectification network.
//!
//! Three feature maps from a backbone are fused by an encoder-decoder
//! ([`msfa_forward`]) into an encoded map `f_e` (one cell per control point)
//! and a decoded map `f_d` (one cell per output location). [`aipe_forward`]
//! turns those into control-point offsets and the attention matrix, using the
//! gated block in [`dgab_forward`].
//!
//! Parameters live in a [`WeightStore`] under the names listed by
//! [`manifest`].

mod aipe;
mod backbone;
mod dgab;
mod msfa;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};
use crate::tps::{ControlPointGrid, DEFAULT_COLS, DEFAULT_ROWS};
use crate::tps_pp::AttentionMatrix;

pub use aipe::aipe_forward;
pub use backbone::{toy_backbone, FeatureBundle};
pub use dgab::dgab_forward;
pub use msfa::{cbam_forward, msfa_forward, EncodedDecodedPair};

/// Network input extent (grayscale).
pub const INPUT_H: usize = 32;
pub const INPUT_W: usize = 128;
/// Channel width `D` shared by `f_e` and `f_d`.
pub const CHANNELS: usize = 64;
/// Decoded-feature extent; also the default rectified output lattice.
pub const FEATURE_H: usize = 16;
pub const FEATURE_W: usize = 64;
/// Encoded-feature extent, equal to the control-point lattice.
pub const ENCODED_H: usize = DEFAULT_ROWS;
pub const ENCODED_W: usize = DEFAULT_COLS;
/// Control-point count `K`.
pub const CONTROL_POINTS: usize = ENCODED_H * ENCODED_W;
/// Output locations `M`.
pub const LOCATIONS: usize = FEATURE_H * FEATURE_W;
pub const CBAM_REDUCTION: usize = 16;
pub const CBAM_KERNEL: usize = 7;
pub const OFFSET_HIDDEN: usize = 64;
/// Backbone channel widths for its three stages.
pub const BACKBONE_CHANNELS: [usize; 3] = [32, 64, 96];

/// Range of the seeded uniform initialiser.
pub const INIT_SCALE: f32 = 0.05;

/// Which part of the network a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Backbone,
    Msfa,
    Dgab,
    Aipe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub group: ParamGroup,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn push_conv(
    out: &mut Vec<ParamSpec>,
    group: ParamGroup,
    name: &str,
    o: usize,
    c: usize,
    k: usize,
) {
    out.push(ParamSpec {
        name: format!("{name}.weight"),
        dims: vec![o, c, k, k],
        group,
    });
    out.push(ParamSpec {
        name: format!("{name}.bias"),
        dims: vec![o],
        group,
    });
}

fn push_linear(out: &mut Vec<ParamSpec>, group: ParamGroup, name: &str, o: usize, i: usize) {
    out.push(ParamSpec {
        name: format!("{name}.weight"),
        dims: vec![o, i],
        group,
    });
    out.push(ParamSpec {
        name: format!("{name}.bias"),
        dims: vec![o],
        group,
    });
}

/// Every parameter the forward passes read, with its shape.
pub fn manifest() -> Vec<ParamSpec> {
    use ParamGroup::*;
    let [c1, c2, c3] = BACKBONE_CHANNELS;
    let d = CHANNELS;
    let mut m = Vec::new();

    push_conv(&mut m, Backbone, "backbone.conv1", c1, 1, 3);
    push_conv(&mut m, Backbone, "backbone.conv2", c2, c1, 3);
    push_conv(&mut m, Backbone, "backbone.conv3", c3, c2, 3);

    push_conv(&mut m, Msfa, "msfa.align1", d, c1, 1);
    push_conv(&mut m, Msfa, "msfa.align2", d, c2, 1);
    push_conv(&mut m, Msfa, "msfa.align3", d, c3, 1);
    push_conv(&mut m, Msfa, "msfa.layer1", d, 3 * d, 1);
    push_conv(&mut m, Msfa, "msfa.layer2", d, d, 3);
    push_conv(&mut m, Msfa, "msfa.layer3", d, d, 3);
    push_linear(&mut m, Msfa, "msfa.cbam.mlp1", d / CBAM_REDUCTION, d);
    push_linear(&mut m, Msfa, "msfa.cbam.mlp2", d, d / CBAM_REDUCTION);
    push_conv(&mut m, Msfa, "msfa.cbam.spatial", 1, 2, CBAM_KERNEL);
    push_conv(&mut m, Msfa, "msfa.layer5", d, d, 3);
    push_conv(&mut m, Msfa, "msfa.layer6", d, d, 3);
    push_conv(&mut m, Msfa, "msfa.layer7", d, d, 3);

    push_linear(
        &mut m,
        Dgab,
        "dgab.width",
        FEATURE_W,
        FEATURE_W + CONTROL_POINTS,
    );
    push_linear(
        &mut m,
        Dgab,
        "dgab.height",
        FEATURE_H,
        FEATURE_H + CONTROL_POINTS,
    );
    push_linear(&mut m, Dgab, "dgab.width_gate", 1, d);
    push_linear(&mut m, Dgab, "dgab.height_gate", 1, d);

    push_linear(&mut m, Aipe, "aipe.offset1", OFFSET_HIDDEN, d);
    push_linear(&mut m, Aipe, "aipe.offset2", 2, OFFSET_HIDDEN);
    m
}

/// Parameter count of the rectifier proper (everything but the backbone).
pub fn rectifier_parameter_count() -> usize {
    manifest()
        .iter()
        .filter(|p| p.group != ParamGroup::Backbone)
        .map(ParamSpec::len)
        .sum()
}

/// Named parameter tensors, kept in lexicographic name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every manifest entry filled with zeros.
    pub fn zeros() -> Self {
        let mut w = Self::new();
        for p in manifest() {
            w.insert(
                p.name,
                Tensor::zeros(&p.dims).expect("manifest dims are valid"),
            );
        }
        w
    }

    /// Uniform `[-0.05, 0.05]` weights from `seed`, with the final offset
    /// layer zeroed so the untrained network rectifies to the identity.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::new();
        for p in manifest() {
            let t = if p.name.starts_with("aipe.offset2.") {
                Tensor::zeros(&p.dims)
            } else {
                Tensor::from_fn(&p.dims, |_| rng.gen_range(-INIT_SCALE..=INIT_SCALE))
            };
            w.insert(p.name, t.expect("manifest dims are valid"));
        }
        w
    }

    /// Inserts or replaces; returns the previous tensor under that name.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    /// Looks up `name` and checks it has exactly `dims`.
    pub fn require(&self, name: &str, dims: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        if t.dims() != dims {
            return Err(Error::shape(format!(
                "parameter `{name}` has shape {:?}, expected {dims:?}",
                t.dims()
            )));
        }
        Ok(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Checks every manifest entry is present with the right shape.
    pub fn validate(&self) -> Result<()> {
        for p in manifest() {
            self.require(&p.name, &p.dims)?;
        }
        Ok(())
    }

    pub(crate) fn conv(
        &self,
        name: &str,
        x: &Tensor,
        o: usize,
        k: usize,
        stride: usize,
    ) -> Result<Tensor> {
        let (c, _, _) = x.chw()?;
        let weight = self.require(&format!("{name}.weight"), &[o, c, k, k])?;
        let bias = self.require(&format!("{name}.bias"), &[o])?;
        tensor::conv2d(x, weight, bias, stride, k / 2)
    }

    /// `x · Wᵀ + b` for `x` of shape `N×in`.
    pub(crate) fn linear(&self, name: &str, x: &Tensor, out: usize) -> Result<Tensor> {
        let (_, inp) = x.matrix_dims()?;
        let weight = self.require(&format!("{name}.weight"), &[out, inp])?;
        let bias = self.require(&format!("{name}.bias"), &[out])?;
        let mut y = tensor::matmul(x, &weight.transpose()?)?.into_data();
        for row in y.chunks_exact_mut(out) {
            for (v, b) in row.iter_mut().zip(bias.data()) {
                *v += b;
            }
        }
        Tensor::new(&[x.dims()[0], out], y)
    }
}

/// Everything one forward pass produces.
#[derive(Debug, Clone)]
pub struct RectifierOutput {
    pub features: FeatureBundle,
    pub pair: EncodedDecodedPair,
    /// Lattice with the regressed offsets applied.
    pub grid: ControlPointGrid,
    /// `M×K` scores over the `FEATURE_H × FEATURE_W` lattice.
    pub attention: AttentionMatrix,
}

/// Backbone, MSFA, and AIPE chained on a `1×32×128` image.
pub fn rectifier_forward(image: &Tensor, w: &WeightStore) -> Result<RectifierOutput> {
    let features = toy_backbone(image, w)?;
    let pair = msfa_forward(&features, w)?;
    let grid = ControlPointGrid::new(ENCODED_H, ENCODED_W)?;
    let (grid, attention) = aipe_forward(&pair, w, &grid)?;
    Ok(RectifierOutput {
        features,
        pair,
        grid,
        attention,
    })
}

/// Order-sensitive summary of a tensor for golden-value checks:
/// `(Σv, Σ|v|, Σ v·(1 + i mod 7))`, accumulated in f64.
pub fn checksum(t: &Tensor) -> [f64; 3] {
    t.data()
        .iter()
        .enumerate()
        .fold([0.0; 3], |mut acc, (i, &v)| {
            let v = v as f64;
            acc[0] += v;
            acc[1] += v.abs();
            acc[2] += v * (1 + i % 7) as f64;
            acc
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_names_are_unique() {
        let m = manifest();
        let mut names: Vec<_> = m.iter().map(|p| p.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), m.len());
    }

    #[test]
    fn rectifier_parameter_count_in_expected_range() {
        let n = rectifier_parameter_count();
        assert!((200_000..=1_000_000).contains(&n), "{n}");
    }

    #[test]
    fn seeded_store_is_complete_and_reproducible() {
        let a = WeightStore::seeded(3);
        a.validate().unwrap();
        assert_eq!(a, WeightStore::seeded(3));
        assert_ne!(a, WeightStore::seeded(4));
        assert!(a
            .get("aipe.offset2.weight")
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(a
            .get("msfa.layer1.weight")
            .unwrap()
            .data()
            .iter()
            .all(|v| v.abs() <= INIT_SCALE));
        assert_eq!(
            a.parameter_count(),
            manifest().iter().map(ParamSpec::len).sum::<usize>()
        );
    }

    #[test]
    fn require_reports_missing_and_misshapen() {
        let mut w = WeightStore::new();
        assert!(matches!(w.require("x", &[2]), Err(Error::MissingParameter(n)) if n == "x"));
        w.insert("x", Tensor::zeros(&[3]).unwrap());
        assert!(matches!(w.require("x", &[2]), Err(Error::Shape(_))));
        assert!(w.require("x", &[3]).is_ok());
    }

    #[test]
    fn linear_adds_bias_per_output() {
        let mut w = WeightStore::new();
        w.insert(
            "l.weight",
            Tensor::new(&[2, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap(),
        );
        w.insert("l.bias", Tensor::new(&[2], vec![0.5, -1.0]).unwrap());
        let x = Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = w.linear("l", &x, 2).unwrap();
        assert_eq!(y.data(), &[1.5, 4.0, 4.5, 10.0]);
    }
}
