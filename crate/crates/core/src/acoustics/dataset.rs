//! Binary RIR dataset:
//!
//! ```text
//! magic[4]="RIRD" version:u32 sample_rate:u32 length:u32 count:u32
//! { scene:u32 source:u32 listener:u32 heading_deg:u16 predicted:u8 f32[2*length] }*
//! ```
//!
//! Little-endian throughout; samples are channel-major (left then right).

use std::io::{Read, Write};
use std::path::Path;

use super::BinauralRIR;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"RIRD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RirRecord {
    pub scene_id: u32,
    pub source_node: u32,
    pub listener_node: u32,
    pub heading_deg: u16,
    pub predicted: bool,
    pub rir: BinauralRIR,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RirDataset {
    pub sample_rate: u32,
    pub length: usize,
    pub records: Vec<RirRecord>,
}

impl RirDataset {
    pub fn new(sample_rate: u32, length: usize) -> Self {
        RirDataset { sample_rate, length, records: Vec::new() }
    }

    pub fn push(&mut self, record: RirRecord) -> Result<()> {
        if record.rir.len() != self.length || record.rir.sample_rate != self.sample_rate {
            return Err(Error::Format(format!(
                "record has {} samples at {} Hz, dataset expects {} at {} Hz",
                record.rir.len(),
                record.rir.sample_rate,
                self.length,
                self.sample_rate
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&DATASET_MAGIC)?;
        for v in [DATASET_VERSION, self.sample_rate, self.length as u32, self.records.len() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for r in &self.records {
            w.write_all(&r.scene_id.to_le_bytes())?;
            w.write_all(&r.source_node.to_le_bytes())?;
            w.write_all(&r.listener_node.to_le_bytes())?;
            w.write_all(&r.heading_deg.to_le_bytes())?;
            w.write_all(&[r.predicted as u8])?;
            for s in r.rir.samples() {
                w.write_all(&s.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != DATASET_MAGIC {
            return Err(Error::Format("bad RIR dataset magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported RIR dataset version {version}")));
        }
        let sample_rate = read_u32(&mut r)?;
        let length = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let mut ds = RirDataset::new(sample_rate, length);
        for _ in 0..count {
            let scene_id = read_u32(&mut r)?;
            let source_node = read_u32(&mut r)?;
            let listener_node = read_u32(&mut r)?;
            let mut h = [0u8; 2];
            r.read_exact(&mut h)?;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let mut samples = Vec::with_capacity(2 * length);
            let mut buf = [0u8; 4];
            for _ in 0..2 * length {
                r.read_exact(&mut buf)?;
                samples.push(f32::from_le_bytes(buf));
            }
            ds.records.push(RirRecord {
                scene_id,
                source_node,
                listener_node,
                heading_deg: u16::from_le_bytes(h),
                predicted: flag[0] != 0,
                rir: BinauralRIR::from_interleaved_channels(sample_rate, samples)?,
            });
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
