//! Field checkpoints: a JSON header `{n, res, kind, components}` next to a
//! flat little-endian f64 payload. Values are point-major (row-major grid
//! order) with components innermost; complex numbers are interleaved re, im.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, SpinorField, TensorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
    Sym2,
    Tensor3,
    Spinor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    pub res: usize,
    pub kind: FieldKind,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Tensor(TensorField),
    Spinor(SpinorField),
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

impl Field {
    fn header(&self) -> FieldHeader {
        let (grid, kind, components) = match self {
            Field::Scalar(s) => (*s.grid(), FieldKind::Scalar, 1),
            Field::Tensor(t) => {
                let kind = match t.rank() {
                    1 => FieldKind::Vector,
                    2 => FieldKind::Sym2,
                    _ => FieldKind::Tensor3,
                };
                (*t.grid(), kind, t.comps.len())
            }
            Field::Spinor(s) => (*s.grid(), FieldKind::Spinor, 2),
        };
        FieldHeader {
            n: grid.n(),
            res: grid.res(),
            kind,
            components,
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Field::Scalar(s) => s.data.clone(),
            Field::Tensor(t) => {
                let len = t.grid().len();
                let mut out = Vec::with_capacity(len * t.comps.len());
                for p in 0..len {
                    out.extend(t.comps.iter().map(|c| c[p]));
                }
                out
            }
            Field::Spinor(s) => {
                let mut out = Vec::with_capacity(s.grid().len() * 4);
                for p in 0..s.grid().len() {
                    for c in &s.comps {
                        out.push(c[p].re);
                        out.push(c[p].im);
                    }
                }
                out
            }
        }
    }

    /// Writes `<stem>.json` and `<stem>.bin`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let (json, bin) = paths(stem);
        fs::write(json, serde_json::to_string_pretty(&self.header())?)?;
        let bytes: Vec<u8> = self.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(bin, bytes)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (json, bin) = paths(stem);
        let header: FieldHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
        let grid = Grid::new(header.n, header.res)?;
        let bytes = fs::read(bin)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
            .collect();
        let len = grid.len();
        let per_point = match header.kind {
            FieldKind::Spinor => 4,
            _ => header.components,
        };
        if values.len() != len * per_point {
            return Err(Error::GridMismatch);
        }
        Ok(match header.kind {
            FieldKind::Scalar => Field::Scalar(ScalarField::new(grid, values)?),
            FieldKind::Vector | FieldKind::Sym2 | FieldKind::Tensor3 => {
                let rank = match header.kind {
                    FieldKind::Vector => 1,
                    FieldKind::Sym2 => 2,
                    _ => 3,
                };
                let comps = (0..per_point)
                    .map(|k| (0..len).map(|p| values[p * per_point + k]).collect())
                    .collect();
                Field::Tensor(TensorField::from_comps(grid, rank, comps)?)
            }
            FieldKind::Spinor => {
                let comp = |k: usize| -> Vec<Complex64> {
                    (0..len)
                        .map(|p| Complex64::new(values[p * 4 + 2 * k], values[p * 4 + 2 * k + 1]))
                        .collect()
                };
                Field::Spinor(SpinorField::from_comps(grid, [comp(0), comp(1)])?)
            }
        })
    }
}
