use std::io::{Read, Write};

use super::{ParamStore, Tensor2};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RNCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named parameter blocks in the versioned binary checkpoint layout:
///
/// ```text
/// magic[4] version:u32 count:u32
/// { name_len:u32 name[name_len] rows:u32 cols:u32 f64[rows*cols] }*
/// ```
///
/// All integers and floats are little-endian.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub blocks: Vec<(String, Tensor2)>,
}

impl Checkpoint {
    /// Collects every block of every store, in order.
    pub fn from_stores(stores: &[&ParamStore]) -> Self {
        let blocks = stores
            .iter()
            .flat_map(|s| s.ids().map(move |id| (s.name(id).to_string(), s.param(id).clone())))
            .collect();
        Checkpoint { blocks }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies matching blocks into `store`. Every block of `store` must be present.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.name(id).to_string();
            let t = self
                .get(&name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks block `{name}`")))?;
            if t.shape() != store.param(id).shape() {
                return Err(Error::Format(format!(
                    "block `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    store.param(id).shape()
                )));
            }
            *store.param_mut(id) = t.clone();
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        for (name, t) in &self.blocks {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rows() as u32).to_le_bytes())?;
            w.write_all(&(t.cols() as u32).to_le_bytes())?;
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut blocks = Vec::with_capacity(count);
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("block name is not UTF-8".into()))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            blocks.push((name, Tensor2::from_vec(rows, cols, data)?));
        }
        Ok(Checkpoint { blocks })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
