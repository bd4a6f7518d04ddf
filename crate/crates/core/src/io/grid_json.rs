//! JSON exchange of control points and attention.
//!
//! ```json
//! {
//!   "rows": 4, "cols": 16,
//!   "base":    [[x, y], ...],        // K lattice points, row-major
//!   "offsets": [[dx, dy], ...],      // K offsets
//!   "lambda": 0.5, "beta": 1.0,
//!   "attention": [[a_00, ...], ...]  // M rows of K scores, or [] for none
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tps::{ControlPointGrid, Point, DEFAULT_BETA, DEFAULT_LAMBDA};
use crate::tps_pp::{AttentionMatrix, SamplingGrid};

/// Base points must reproduce the lattice to this tolerance on import.
const LATTICE_TOLERANCE: f64 = 1e-9;

/// A control-point configuration as exchanged on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDocument {
    pub grid: ControlPointGrid,
    pub attention: Option<AttentionMatrix>,
    pub lambda: f64,
    pub beta: f64,
}

impl GridDocument {
    pub fn new(grid: ControlPointGrid) -> Self {
        GridDocument {
            grid,
            attention: None,
            lambda: DEFAULT_LAMBDA,
            beta: DEFAULT_BETA,
        }
    }

    pub fn with_attention(mut self, attention: AttentionMatrix) -> Self {
        self.attention = Some(attention);
        self
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    rows: usize,
    cols: usize,
    base: Vec<[f64; 2]>,
    offsets: Vec<[f64; 2]>,
    lambda: f64,
    beta: f64,
    #[serde(default)]
    attention: Vec<Vec<f64>>,
}

pub fn grid_to_json(doc: &GridDocument) -> String {
    let wire = Wire {
        rows: doc.grid.rows(),
        cols: doc.grid.cols(),
        base: doc.grid.base().iter().map(|p| [p.x, p.y]).collect(),
        offsets: doc.grid.offsets().iter().map(|p| [p.x, p.y]).collect(),
        lambda: doc.lambda,
        beta: doc.beta,
        attention: doc
            .attention
            .as_ref()
            .map(|a| (0..a.m_locations()).map(|i| a.row(i).to_vec()).collect())
            .unwrap_or_default(),
    };
    serde_json::to_string(&wire).expect("plain numeric document serializes")
}

pub fn grid_from_json(text: &str) -> Result<GridDocument> {
    let wire: Wire =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("grid JSON: {e}")))?;
    let grid = ControlPointGrid::new(wire.rows, wire.cols)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let k = grid.len();
    if wire.base.len() != k {
        return Err(Error::Validation(format!(
            "{} base points for a {}×{} grid",
            wire.base.len(),
            wire.rows,
            wire.cols
        )));
    }
    for (i, (got, want)) in wire.base.iter().zip(grid.base()).enumerate() {
        if !((got[0] - want.x).abs() <= LATTICE_TOLERANCE
            && (got[1] - want.y).abs() <= LATTICE_TOLERANCE)
        {
            return Err(Error::Validation(format!(
                "base point {i} ({}, {}) is off the lattice, expected ({}, {})",
                got[0], got[1], want.x, want.y
            )));
        }
    }
    if wire.offsets.len() != k {
        return Err(Error::Validation(format!(
            "{} offsets for {k} control points",
            wire.offsets.len()
        )));
    }
    if let Some(i) = wire
        .offsets
        .iter()
        .position(|o| !(o[0].is_finite() && o[1].is_finite()))
    {
        return Err(Error::Validation(format!("offset {i} is not finite")));
    }
    if !wire.lambda.is_finite() || !wire.beta.is_finite() {
        return Err(Error::Validation("lambda and beta must be finite".into()));
    }
    let grid = grid.with_offsets(
        wire.offsets
            .iter()
            .map(|o| Point::new(o[0], o[1]))
            .collect(),
    )?;

    let attention = if wire.attention.is_empty() {
        None
    } else {
        let m = wire.attention.len();
        let mut scores = Vec::with_capacity(m * k);
        for (i, row) in wire.attention.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Validation(format!(
                    "attention row {i} has {} columns, grid has {k} control points",
                    row.len()
                )));
            }
            scores.extend_from_slice(row);
        }
        Some(AttentionMatrix::new(m, k, scores)?)
    };
    Ok(GridDocument {
        grid,
        attention,
        lambda: wire.lambda,
        beta: wire.beta,
    })
}

pub fn export_grid_json(doc: &GridDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_json(doc)).map_err(|e| Error::io(path, e))
}

pub fn import_grid_json(path: impl AsRef<Path>) -> Result<GridDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    grid_from_json(&text)
}

/// `{"height": H, "width": W, "coords": [{"x": .., "y": ..}, ...]}`.
pub fn sampling_grid_to_json(grid: &SamplingGrid) -> String {
    serde_json::to_string(grid).expect("plain numeric document serializes")
}

pub fn sampling_grid_from_json(text: &str) -> Result<SamplingGrid> {
    let g: SamplingGrid = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("sampling grid JSON: {e}")))?;
    SamplingGrid::new(g.height, g.width, g.coords).map_err(|e| Error::Validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tps::make_grid;
    use proptest::prelude::*;

    fn doc_with_attention(scores: Vec<f64>, m: usize) -> GridDocument {
        let g = make_grid(2, 3).unwrap();
        GridDocument::new(g).with_attention(AttentionMatrix::new(m, 6, scores).unwrap())
    }

    #[test]
    fn roundtrip_without_attention() {
        let g = make_grid(4, 16)
            .unwrap()
            .with_offsets(vec![Point::new(0.01, -0.3); 64])
            .unwrap();
        let doc = GridDocument::new(g);
        let back = grid_from_json(&grid_to_json(&doc)).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn attention_out_of_range_names_the_entry() {
        let doc = doc_with_attention(vec![0.0; 12], 2);
        let text = grid_to_json(&doc);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["attention"][1][4] = serde_json::json!(1.5);
        let err = grid_from_json(&v.to_string()).unwrap_err();
        assert!(
            matches!(&err, Error::Validation(m) if m.contains("row 1, col 4")),
            "{err}"
        );
    }

    #[test]
    fn attention_width_must_match_grid() {
        let doc = doc_with_attention(vec![0.1; 12], 2);
        let mut v: serde_json::Value = serde_json::from_str(&grid_to_json(&doc)).unwrap();
        v["attention"][0] = serde_json::json!([0.1, 0.1, 0.1]);
        assert!(matches!(
            grid_from_json(&v.to_string()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn structural_problems() {
        let doc = GridDocument::new(make_grid(2, 2).unwrap());
        let base: serde_json::Value = serde_json::from_str(&grid_to_json(&doc)).unwrap();

        let mut v = base.clone();
        v["base"][2] = serde_json::json!([0.0, 0.0]);
        assert!(
            matches!(grid_from_json(&v.to_string()), Err(Error::Validation(m)) if m.contains("base point 2"))
        );

        let mut v = base.clone();
        v["rows"] = serde_json::json!(1);
        v["cols"] = serde_json::json!(1);
        assert!(matches!(
            grid_from_json(&v.to_string()),
            Err(Error::Validation(_))
        ));

        let mut v = base.clone();
        v["offsets"] = serde_json::json!([[0.0, 0.0]]);
        assert!(matches!(
            grid_from_json(&v.to_string()),
            Err(Error::Validation(_))
        ));

        assert!(matches!(grid_from_json("{not json"), Err(Error::Format(_))));
        assert!(matches!(grid_from_json("{}"), Err(Error::Format(_))));
    }

    #[test]
    fn sampling_grid_roundtrip() {
        let g = SamplingGrid::identity(3, 5);
        assert_eq!(
            sampling_grid_from_json(&sampling_grid_to_json(&g)).unwrap(),
            g
        );
        assert!(sampling_grid_from_json(r#"{"height":2,"width":2,"coords":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_within_tolerance(
            offsets in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            scores in proptest::collection::vec(-0.999f64..0.999, 18),
            lambda in -2.0f64..2.0,
        ) {
            let g = make_grid(2, 3).unwrap()
                .with_offsets(offsets.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
            let mut doc = GridDocument::new(g).with_attention(AttentionMatrix::new(3, 6, scores).unwrap());
            doc.lambda = lambda;
            let back = grid_from_json(&grid_to_json(&doc)).unwrap();
            for (a, b) in back.grid.offsets().iter().zip(doc.grid.offsets()) {
                prop_assert!((a.x - b.x).abs() <= 1e-9 && (a.y - b.y).abs() <= 1e-9);
            }
            let (a, b) = (back.attention.unwrap(), doc.attention.unwrap());
            for (x, y) in a.scores().iter().zip(b.scores()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
            prop_assert!((back.lambda - doc.lambda).abs() <= 1e-9);
        }
    }
}
