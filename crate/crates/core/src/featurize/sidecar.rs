//! Contextual-vector sidecar files.
//!
//! Binary, little-endian:
//!
//! ```text
//! magic   8 bytes  "TOWECTX\0"
//! version u32      1
//! count   u32      number of sentences
//! count × {
//!     id_len u32, id (UTF-8, id_len bytes),
//!     rows u32, cols u32,
//!     rows × cols f32, row-major, row i = token i
//! }
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::params::Matrix;

pub const SIDECAR_MAGIC: &[u8; 8] = b"TOWECTX\0";
pub const SIDECAR_VERSION: u32 = 1;

/// Per-sentence contextual vectors keyed by sentence id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextualVectors {
    pub dim: usize,
    pub matrices: BTreeMap<String, Matrix>,
}

impl ContextualVectors {
    pub fn new(dim: usize) -> Self {
        ContextualVectors {
            dim,
            matrices: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn get(&self, sentence_id: &str) -> Option<&Matrix> {
        self.matrices.get(sentence_id)
    }

    pub fn insert(&mut self, sentence_id: impl Into<String>, m: Matrix) -> Result<()> {
        if self.matrices.is_empty() && self.dim == 0 {
            self.dim = m.ncols();
        }
        if m.ncols() != self.dim {
            return Err(Error::Feature(format!(
                "contextual width {} differs from {}",
                m.ncols(),
                self.dim
            )));
        }
        self.matrices.insert(sentence_id.into(), m);
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let bad = |m: &str| Error::Load {
            path: path.to_owned(),
            line: 0,
            message: m.to_owned(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != SIDECAR_MAGIC {
            return Err(bad("not a contextual-vector file"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != SIDECAR_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = r.read_u32::<LittleEndian>().map_err(io)?;
        let mut out = ContextualVectors::default();
        for _ in 0..count {
            let id_len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id).map_err(io)?;
            let id = String::from_utf8(id).map_err(|_| bad("sentence id is not UTF-8"))?;
            let rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let cols = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut buf = vec![0f32; rows * cols];
            r.read_f32_into::<LittleEndian>(&mut buf).map_err(io)?;
            let m = Array2::from_shape_vec((rows, cols), buf.into_iter().map(f64::from).collect())
                .map_err(|e| bad(&e.to_string()))?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(bad(&format!("non-finite value for sentence {id}")));
            }
            out.insert(id, m)?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(SIDECAR_MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(SIDECAR_VERSION).map_err(io)?;
        w.write_u32::<LittleEndian>(self.matrices.len() as u32).map_err(io)?;
        for (id, m) in &self.matrices {
            w.write_u32::<LittleEndian>(id.len() as u32).map_err(io)?;
            w.write_all(id.as_bytes()).map_err(io)?;
            w.write_u32::<LittleEndian>(m.nrows() as u32).map_err(io)?;
            w.write_u32::<LittleEndian>(m.ncols() as u32).map_err(io)?;
            for v in m.iter() {
                w.write_f32::<LittleEndian>(*v as f32).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}
