//! Named parameter collections and the flat checkpoint format.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  b"CEDK"
//! version 1 byte   0x01
//! count   u32      number of records
//! record  repeated:
//!   name_len u16, name utf-8 bytes
//!   shape    4 x u32   (N, C, H, W)
//!   values   N*C*H*W x f64, raw little-endian
//! ```
//!
//! Records appear in `ParamSet` iteration order, which is the deterministic
//! construction order of the model. Non-trainable buffers (batch-norm running
//! statistics) are stored alongside weights; fixed constants such as the
//! Laplacian template are not parameters and never appear here.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::tensor::{Shape, Tensor};

const MAGIC: [u8; 4] = *b"CEDK";
const VERSION: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path} is not a checkpoint (bad magic)")]
    BadMagic { path: String },
    #[error("{path}: unsupported checkpoint version {version}")]
    BadVersion { path: String, version: u8 },
    #[error("checkpoint is missing parameter {0}")]
    MissingParam(String),
    #[error("parameter {name}: checkpoint shape {found:?} does not match model shape {expected:?}")]
    ShapeMismatch { name: String, expected: Shape, found: Shape },
    #[error("duplicate parameter name {0}")]
    DuplicateName(String),
}

#[derive(Clone)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    /// Buffers (running statistics) are saved and restored but not optimized.
    pub trainable: bool,
}

/// Ordered, uniquely named collection of model tensors.
#[derive(Default, Clone)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.push_entry(name, tensor, true);
    }

    pub fn push_buffer(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.push_entry(name, tensor, false);
    }

    fn push_entry(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) {
        let name = name.into();
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry { name, tensor, trainable });
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter()
    }

    pub fn trainable(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter().filter(|e| e.trainable)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.tensor.numel()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn zero_grads(&self) {
        for e in &self.entries {
            e.tensor.zero_grad();
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let res: io::Result<()> = (|| {
            w.write_all(&MAGIC)?;
            w.write_all(&[VERSION])?;
            w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
            for e in &self.entries {
                let name = e.name.as_bytes();
                w.write_all(&(name.len() as u16).to_le_bytes())?;
                w.write_all(name)?;
                for d in e.tensor.shape() {
                    w.write_all(&(d as u32).to_le_bytes())?;
                }
                e.tensor.with_data(|d| {
                    for v in d {
                        w.write_all(&v.to_le_bytes())?;
                    }
                    Ok::<(), io::Error>(())
                })?;
            }
            w.flush()
        })();
        res.map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    /// Copies checkpoint values into this set's tensors, matching by name.
    pub fn load(&self, path: &Path) -> Result<(), CheckpointError> {
        let records = read_records(path)?;
        for e in &self.entries {
            let (shape, values) = records
                .iter()
                .find(|(n, ..)| n == &e.name)
                .map(|(_, s, v)| (*s, v))
                .ok_or_else(|| CheckpointError::MissingParam(e.name.clone()))?;
            if shape != e.tensor.shape() {
                return Err(CheckpointError::ShapeMismatch {
                    name: e.name.clone(),
                    expected: e.tensor.shape(),
                    found: shape,
                });
            }
            e.tensor.set_data(values);
        }
        Ok(())
    }
}

fn read_records(path: &Path) -> Result<Vec<(String, Shape, Vec<f64>)>, CheckpointError> {
    let p = path.display().to_string();
    let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic { path: p });
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version).map_err(io_err)?;
    if version[0] != VERSION {
        return Err(CheckpointError::BadVersion { path: p, version: version[0] });
    }
    let mut count = [0u8; 4];
    r.read_exact(&mut count).map_err(io_err)?;
    let count = u32::from_le_bytes(count) as usize;

    let mut records = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let mut len = [0u8; 2];
        r.read_exact(&mut len).map_err(io_err)?;
        let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8_lossy(&name).into_owned();
        if !seen.insert(name.clone()) {
            return Err(CheckpointError::DuplicateName(name));
        }
        let mut shape = [0usize; 4];
        for d in &mut shape {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(io_err)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b).map_err(io_err)?;
            values.push(f64::from_le_bytes(b));
        }
        records.push((name, shape, values));
    }
    Ok(records)
}
