//! Checkpoint archive: a single file holding every parameter set, optimizer
//! moments, the training config, step counter and RNG state, as a versioned
//! keyed binary map. Floats are stored bit-exactly (little endian), so a
//! restored run continues bitwise-identically.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{ArrayD, IxDyn};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"TCGNCKPT";
const VERSION: u32 = 1;

const KIND_BYTES: u8 = 0;
const KIND_TENSOR: u8 = 1;

/// One stored value.
pub enum Entry {
    Bytes(Vec<u8>),
    Tensor { dtype: String, shape: Vec<usize>, data: Vec<u8> },
}

/// Keyed map of entries, ordered for reproducible files.
#[derive(Default)]
pub struct Archive {
    entries: BTreeMap<String, Entry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bytes(&mut self, key: &str, bytes: Vec<u8>) {
        self.entries.insert(key.to_string(), Entry::Bytes(bytes));
    }

    pub fn put_json<T: serde::Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec(value)
            .map_err(|e| Error::Checkpoint(format!("serialize {key}: {e}")))?;
        self.put_bytes(key, bytes);
        Ok(())
    }

    pub fn put_u64(&mut self, key: &str, v: u64) {
        self.put_bytes(key, v.to_le_bytes().to_vec());
    }

    pub fn put_tensor<F: Scalar>(&mut self, key: &str, t: &ArrayD<F>) {
        let mut data = Vec::new();
        let standard = t.as_standard_layout();
        F::write_le(standard.as_slice().expect("standard layout"), &mut data);
        self.entries.insert(
            key.to_string(),
            Entry::Tensor {
                dtype: F::DTYPE.to_string(),
                shape: t.shape().to_vec(),
                data,
            },
        );
    }

    pub fn get_bytes(&self, key: &str) -> Result<&[u8]> {
        match self.entries.get(key) {
            Some(Entry::Bytes(b)) => Ok(b),
            Some(Entry::Tensor { .. }) => {
                Err(Error::Checkpoint(format!("`{key}` is a tensor, not bytes")))
            }
            None => Err(Error::Checkpoint(format!("missing entry `{key}`"))),
        }
    }

    pub fn get_json<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        serde_json::from_slice(self.get_bytes(key)?)
            .map_err(|e| Error::Checkpoint(format!("parse {key}: {e}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let b = self.get_bytes(key)?;
        let arr: [u8; 8] = b
            .try_into()
            .map_err(|_| Error::Checkpoint(format!("`{key}` is not a u64")))?;
        Ok(u64::from_le_bytes(arr))
    }

    pub fn get_tensor<F: Scalar>(&self, key: &str) -> Result<ArrayD<F>> {
        match self.entries.get(key) {
            Some(Entry::Tensor { dtype, shape, data }) => {
                if dtype != F::DTYPE {
                    return Err(Error::Checkpoint(format!(
                        "`{key}` has dtype {dtype}, expected {}",
                        F::DTYPE
                    )));
                }
                let values = F::read_le(data)
                    .ok_or_else(|| Error::Checkpoint(format!("`{key}` data length")))?;
                ArrayD::from_shape_vec(IxDyn(shape), values)
                    .map_err(|e| Error::Checkpoint(format!("`{key}` shape: {e}")))
            }
            Some(Entry::Bytes(_)) => {
                Err(Error::Checkpoint(format!("`{key}` is bytes, not a tensor")))
            }
            None => Err(Error::Checkpoint(format!("missing entry `{key}`"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (key, entry) in &self.entries {
            let kb = key.as_bytes();
            w.write_all(&(kb.len() as u32).to_le_bytes())?;
            w.write_all(kb)?;
            match entry {
                Entry::Bytes(b) => {
                    w.write_all(&[KIND_BYTES])?;
                    w.write_all(&(b.len() as u64).to_le_bytes())?;
                    w.write_all(b)?;
                }
                Entry::Tensor { dtype, shape, data } => {
                    w.write_all(&[KIND_TENSOR])?;
                    let db = dtype.as_bytes();
                    w.write_all(&(db.len() as u32).to_le_bytes())?;
                    w.write_all(db)?;
                    w.write_all(&(shape.len() as u32).to_le_bytes())?;
                    for &d in shape {
                        w.write_all(&(d as u64).to_le_bytes())?;
                    }
                    w.write_all(&(data.len() as u64).to_le_bytes())?;
                    w.write_all(data)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf)?;
            Ok(buf)
        }
        let magic = take::<8>(&mut r)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic (not a checkpoint)".into()));
        }
        let version = u32::from_le_bytes(take::<4>(&mut r)?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = u32::from_le_bytes(take::<4>(&mut r)?);
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let klen = u32::from_le_bytes(take::<4>(&mut r)?) as usize;
            let mut kb = vec![0u8; klen];
            r.read_exact(&mut kb)?;
            let key = String::from_utf8(kb)
                .map_err(|_| Error::Checkpoint("non-utf8 key".into()))?;
            let kind = take::<1>(&mut r)?[0];
            let entry = match kind {
                KIND_BYTES => {
                    let len = u64::from_le_bytes(take::<8>(&mut r)?) as usize;
                    let mut b = vec![0u8; len];
                    r.read_exact(&mut b)?;
                    Entry::Bytes(b)
                }
                KIND_TENSOR => {
                    let dlen = u32::from_le_bytes(take::<4>(&mut r)?) as usize;
                    let mut db = vec![0u8; dlen];
                    r.read_exact(&mut db)?;
                    let dtype = String::from_utf8(db)
                        .map_err(|_| Error::Checkpoint("non-utf8 dtype".into()))?;
                    let ndim = u32::from_le_bytes(take::<4>(&mut r)?) as usize;
                    let mut shape = Vec::with_capacity(ndim);
                    for _ in 0..ndim {
                        shape.push(u64::from_le_bytes(take::<8>(&mut r)?) as usize);
                    }
                    let len = u64::from_le_bytes(take::<8>(&mut r)?) as usize;
                    let mut data = vec![0u8; len];
                    r.read_exact(&mut data)?;
                    Entry::Tensor { dtype, shape, data }
                }
                other => {
                    return Err(Error::Checkpoint(format!("unknown entry kind {other}")))
                }
            };
            entries.insert(key, entry);
        }
        Ok(Archive { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Checkpoint(format!("cannot open {}: {e}", path.display()))
        })?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
