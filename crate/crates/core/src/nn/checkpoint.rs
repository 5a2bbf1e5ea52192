//! Flat binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "DFCK"
//! version  u32      1
//! meta_len u32, meta_len bytes of UTF-8 JSON metadata
//! count    u32
//! count x { name_len u32, name bytes, rows u32, cols u32,
//!           precision u8 (4 = f32, 8 = f64), rows*cols*precision payload bytes }
//! ```

use std::path::Path;

use super::matrix::DenseMatrix;
use super::real::{Precision, Real};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DFCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub precision: Precision,
    payload: Vec<u8>,
}

impl TensorRecord {
    pub fn from_matrix<T: Real>(name: impl Into<String>, m: &DenseMatrix<T>) -> Self {
        let mut payload = Vec::with_capacity(m.len() * T::PRECISION.byte_width());
        for &v in m.as_slice() {
            v.write_le(&mut payload);
        }
        Self {
            name: name.into(),
            rows: m.rows(),
            cols: m.cols(),
            precision: T::PRECISION,
            payload,
        }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<DenseMatrix<T>> {
        if self.precision != T::PRECISION {
            return Err(Error::InvalidInput(format!(
                "record {} is stored as {:?}, requested {:?}",
                self.name,
                self.precision,
                T::PRECISION
            )));
        }
        let w = self.precision.byte_width();
        let data = self.payload.chunks_exact(w).map(T::read_le).collect();
        DenseMatrix::from_vec(self.rows, self.cols, data)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub records: Vec<TensorRecord>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err(format!("truncated at byte {} (need {n} more)", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    pub fn push<T: Real>(&mut self, name: impl Into<String>, m: &DenseMatrix<T>) {
        self.records.push(TensorRecord::from_matrix(name, m));
    }

    pub fn find(&self, name: &str) -> Option<&TensorRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn get<T: Real>(&self, name: &str) -> Result<DenseMatrix<T>> {
        self.find(name)
            .ok_or_else(|| Error::InvalidInput(format!("checkpoint has no record named {name}")))?
            .to_matrix()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.rows as u32).to_le_bytes());
            out.extend_from_slice(&(r.cols as u32).to_le_bytes());
            out.push(r.precision.tag());
            out.extend_from_slice(&r.payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err("bad magic bytes".into());
        }
        let version = rd.u32()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let meta_len = rd.u32()? as usize;
        let metadata = String::from_utf8(rd.take(meta_len)?.to_vec()).map_err(|e| e.to_string())?;
        let count = rd.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = rd.u32()? as usize;
            let name = String::from_utf8(rd.take(name_len)?.to_vec()).map_err(|e| e.to_string())?;
            let rows = rd.u32()? as usize;
            let cols = rd.u32()? as usize;
            let tag = rd.take(1)?[0];
            let precision = Precision::from_tag(tag).ok_or_else(|| format!("record {name}: precision tag {tag}"))?;
            let payload = rd.take(rows * cols * precision.byte_width())?.to_vec();
            records.push(TensorRecord {
                name,
                rows,
                cols,
                precision,
                payload,
            });
        }
        if rd.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - rd.pos));
        }
        Ok(Self { metadata, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}
