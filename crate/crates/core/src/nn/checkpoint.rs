//! Parameter checkpoints as JSON.
//!
//! ```json
//! {"matrices": [{"name": "sgnn.w0", "rows": 3, "cols": 2, "data": [..]}]}
//! ```
//!
//! `data` is row-major. Reals are printed in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NamedMatrix {
    pub fn new(name: impl Into<String>, t: &Tensor) -> Self {
        NamedMatrix {
            name: name.into(),
            rows: t.nrows(),
            cols: t.ncols(),
            data: t.iter().copied().collect(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::Shape(format!("{}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub matrices: Vec<NamedMatrix>,
}

impl Checkpoint {
    pub fn push(&mut self, name: impl Into<String>, t: &Tensor) {
        self.matrices.push(NamedMatrix::new(name, t));
    }

    pub fn get(&self, name: &str) -> Result<Tensor> {
        self.matrices
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no matrix named {name}")))?
            .to_tensor()
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn save_load_is_bit_exact(data in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 6)) {
            let t = Tensor::from_shape_vec((2, 3), data).unwrap();
            let mut ck = Checkpoint::default();
            ck.push("w", &t);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("ck.json");
            save_checkpoint(&ck, &p).unwrap();
            let back = load_checkpoint(&p).unwrap().get("w").unwrap();
            for (a, b) in t.iter().zip(back.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
