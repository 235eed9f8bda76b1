//! Binary model checkpoints: a header with a JSON config followed by named
//! float32 tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 8] = b"SQGCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    Kind { expected: String, found: String },
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("tensor {0} missing from checkpoint")]
    MissingTensor(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Model family tag, e.g. "pgn" or "reranker".
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String, CheckpointError> {
    let n = read_u32(r)? as usize;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| CheckpointError::Corrupt("string is not UTF-8".into()))
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(&mut w, &self.kind)?;
        write_str(&mut w, &serde_json::to_string(&self.config)?)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            write_str(&mut w, &t.name)?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for d in &t.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let kind = read_str(&mut r)?;
        let config = serde_json::from_str(&read_str(&mut r)?)?;
        let count = read_u32(&mut r)?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = read_str(&mut r)?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Checkpoint { kind, config, tensors })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind != kind {
            return Err(CheckpointError::Kind { expected: kind.into(), found: self.kind.clone() });
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.into()))
    }
}

/// Splits a flat parameter vector into tensors following `layout`.
pub(crate) fn tensors_from_layout(layout: &crate::nn::Layout, params: &[f64]) -> Vec<Tensor> {
    layout
        .entries
        .iter()
        .map(|(name, slot)| Tensor {
            name: name.clone(),
            shape: vec![slot.rows, slot.cols],
            data: slot.vec(params).iter().map(|&x| x as f32).collect(),
        })
        .collect()
}

/// Inverse of [`tensors_from_layout`].
pub(crate) fn params_from_tensors(
    layout: &crate::nn::Layout,
    ckpt: &Checkpoint,
) -> Result<Vec<f64>, CheckpointError> {
    let mut params = vec![0.0; layout.size];
    for (name, slot) in &layout.entries {
        let t = ckpt.tensor(name)?;
        if t.shape != [slot.rows, slot.cols] {
            return Err(CheckpointError::Shape {
                name: name.clone(),
                expected: vec![slot.rows, slot.cols],
                found: t.shape.clone(),
            });
        }
        for (dst, src) in slot.vec_mut(&mut params).iter_mut().zip(&t.data) {
            *dst = f64::from(*src);
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ck = Checkpoint {
            kind: "toy".into(),
            config: serde_json::json!({"hidden": 3}),
            tensors: vec![Tensor { name: "w".into(), shape: vec![2, 3], data: vec![1.0, -2.5, 0.0, 3.0, 1e-7, 9.0] }],
        };
        let p = dir.path().join("m.ckpt");
        ck.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, ck);
        assert!(back.expect_kind("pgn").is_err());
        std::fs::write(&p, b"garbage!garbage").unwrap();
        assert!(matches!(Checkpoint::load(&p), Err(CheckpointError::BadMagic)));
    }
}
