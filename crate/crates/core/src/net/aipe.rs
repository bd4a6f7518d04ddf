use super::dgab::{dgab_forward, encoded_sequence};
use super::{EncodedDecodedPair, WeightStore, OFFSET_HIDDEN};
use crate::error::{Error, Result};
use crate::tensor::{matmul, relu, tanh};
use crate::tps::{ControlPointGrid, Point};
use crate::tps_pp::AttentionMatrix;

/// Regresses control-point offsets and scores every output location against
/// every control point.
///
/// Offsets come from two linear layers over the encoded sequence (`K×D`).
/// Attention is `tanh(Q · Eᵀ / √D)` with `Q` the gated decoded features
/// flattened to `M×D` (row-major over the decoded lattice) and `E` the
/// encoded sequence.
pub fn aipe_forward(
    pair: &EncodedDecodedPair,
    w: &WeightStore,
    grid: &ControlPointGrid,
) -> Result<(ControlPointGrid, AttentionMatrix)> {
    let (d, he, we) = pair.f_e.chw()?;
    if (grid.rows(), grid.cols()) != (he, we) {
        return Err(Error::shape(format!(
            "{}×{} control grid does not match {he}×{we} encoded features",
            grid.rows(),
            grid.cols()
        )));
    }
    let encoded = encoded_sequence(&pair.f_e)?;

    let hidden = relu(&w.linear("aipe.offset1", &encoded, OFFSET_HIDDEN)?);
    let offsets = w.linear("aipe.offset2", &hidden, 2)?;
    let offsets: Vec<Point> = offsets
        .data()
        .chunks_exact(2)
        .map(|o| Point::new(o[0] as f64, o[1] as f64))
        .collect();
    let regressed = grid.clone().with_offsets(offsets)?;

    let gated = dgab_forward(pair, w)?;
    let (_, hd, wd) = gated.chw()?;
    let queries = gated.reshape(&[d, hd * wd])?.transpose()?;
    let logits = matmul(&queries, &encoded.transpose()?)?.scale(1.0 / (d as f32).sqrt());
    let attention = AttentionMatrix::from_tensor(&tanh(&logits))?;
    Ok((regressed, attention))
}
