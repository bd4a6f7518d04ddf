//! Dynamic gated-attention block.
//!
//! 1. `f_d` (`D×H×W`) is averaged over `H` and over `W`, giving a width
//!    sequence (`W×D`) and a height sequence (`H×D`).
//! 2. `f_e` is flattened to `K×D`, one row per control point.
//! 3. Each sequence is stacked on top of `f_e` along the sequence axis and a
//!    linear map over that axis brings it back to `W×D` (resp. `H×D`).
//! 4. A per-position gate `sigmoid(x·v + b)` scores every column (row).
//! 5. The aligned features are softmaxed over `D` and scaled by the gate.
//! 6. Both are broadcast to `H×W×D` and summed.
//! 7. The sum multiplies `f_d` element-wise.

use super::{EncodedDecodedPair, WeightStore};
use crate::error::{Error, Result};
use crate::tensor::{concat, reduce_mean, sigmoid, softmax, Tensor};

/// `f_e` as a `K×D` sequence, `k = row · cols + col`.
pub(crate) fn encoded_sequence(f_e: &Tensor) -> Result<Tensor> {
    let (d, h, w) = f_e.chw()?;
    f_e.reshape(&[d, h * w])?.transpose()
}

fn gated_branch(w: &WeightStore, name: &str, seq: &Tensor, encoded: &Tensor) -> Result<Tensor> {
    let (n, d) = seq.matrix_dims()?;
    let stacked = concat(seq, encoded, 0)?;
    // Linear over the sequence axis: (n × (n+K)) · ((n+K) × D).
    let aligned = w.linear(name, &stacked.transpose()?, n)?.transpose()?;
    let gate = sigmoid(&w.linear(&format!("{name}_gate"), &aligned, 1)?);
    let weights = softmax(&aligned, 1)?;
    let mut out = weights.into_data();
    for (row, &g) in out.chunks_exact_mut(d).zip(gate.data()) {
        row.iter_mut().for_each(|v| *v *= g);
    }
    Tensor::new(&[n, d], out)
}

/// Gated attention map of shape `D×H×W`, already multiplied into `f_d`.
pub fn dgab_forward(pair: &EncodedDecodedPair, w: &WeightStore) -> Result<Tensor> {
    let (d, h, wd) = pair.f_d.chw()?;
    let (de, _, _) = pair.f_e.chw()?;
    if de != d {
        return Err(Error::shape(format!(
            "encoded has {de} channels, decoded has {d}"
        )));
    }
    let encoded = encoded_sequence(&pair.f_e)?;
    let width_seq = reduce_mean(&pair.f_d, 1)?.transpose()?; // W×D
    let height_seq = reduce_mean(&pair.f_d, 2)?.transpose()?; // H×D

    let gw = gated_branch(w, "dgab.width", &width_seq, &encoded)?;
    let gh = gated_branch(w, "dgab.height", &height_seq, &encoded)?;

    let (gw, gh, fd) = (gw.data(), gh.data(), pair.f_d.data());
    let mut out = vec![0.0f32; d * h * wd];
    for c in 0..d {
        for i in 0..h {
            for j in 0..wd {
                let idx = (c * h + i) * wd + j;
                out[idx] = (gw[j * d + c] + gh[i * d + c]) * fd[idx];
            }
        }
    }
    Tensor::new(&[d, h, wd], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::manifest;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// Zero weights for an arbitrary small configuration.
    fn zero_store(d: usize, h: usize, w: usize, k: usize) -> WeightStore {
        let mut s = WeightStore::new();
        for (name, o, i) in [("dgab.width", w, w + k), ("dgab.height", h, h + k)] {
            s.insert(format!("{name}.weight"), Tensor::zeros(&[o, i]).unwrap());
            s.insert(format!("{name}.bias"), Tensor::zeros(&[o]).unwrap());
            s.insert(
                format!("{name}_gate.weight"),
                Tensor::zeros(&[1, d]).unwrap(),
            );
            s.insert(format!("{name}_gate.bias"), Tensor::zeros(&[1]).unwrap());
        }
        s
    }

    #[test]
    fn zero_weights_on_toy_shape() {
        // D = 2, H = W = 2, K = 4 (a 2×2 encoded map). Every aligned feature
        // is zero, so softmax over D gives 1/2, the gates give 1/2, and each
        // broadcast sum is 2 · (1/2 · 1/2) = 1/2.
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let pair = EncodedDecodedPair {
            f_e: random(&[2, 2, 2], &mut rng),
            f_d: random(&[2, 2, 2], &mut rng),
        };
        let out = dgab_forward(&pair, &zero_store(2, 2, 2, 4)).unwrap();
        for (o, f) in out.data().iter().zip(pair.f_d.data()) {
            assert_eq!(*o, 0.5 * f);
        }
    }

    #[test]
    fn zero_weights_default_shape_is_f_d_over_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let pair = EncodedDecodedPair {
            f_e: random(&[64, 4, 16], &mut rng),
            f_d: random(&[64, 16, 64], &mut rng),
        };
        let out = dgab_forward(&pair, &WeightStore::zeros()).unwrap();
        assert_eq!(out.dims(), &[64, 16, 64]);
        for (o, f) in out.data().iter().zip(pair.f_d.data()) {
            assert!((o - f / 64.0).abs() <= 1e-7);
        }
    }

    #[test]
    fn encoded_sequence_is_row_major_over_the_lattice() {
        let f_e = Tensor::from_fn(&[2, 2, 3], |i| i as f32).unwrap();
        let seq = encoded_sequence(&f_e).unwrap();
        assert_eq!(seq.dims(), &[6, 2]);
        // Control point k = 4 is row 1, col 1; channel 1 sits 6 further on.
        assert_eq!(&seq.data()[8..10], &[4.0, 10.0]);
    }

    #[test]
    fn channel_mismatch() {
        let pair = EncodedDecodedPair {
            f_e: Tensor::zeros(&[32, 4, 16]).unwrap(),
            f_d: Tensor::zeros(&[64, 16, 64]).unwrap(),
        };
        assert!(matches!(
            dgab_forward(&pair, &WeightStore::zeros()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn gate_weights_follow_the_manifest() {
        let m = manifest();
        let gate = m
            .iter()
            .find(|p| p.name == "dgab.width_gate.weight")
            .unwrap();
        assert_eq!(gate.dims, vec![1, 64]);
    }
}
