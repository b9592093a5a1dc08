use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{Activation, Dense, DenseOut, ParamStore, Tensor2};
use crate::scene::Heading;

/// Meters per unit of the position encoding.
pub const POSITION_SCALE: f64 = 10.0;

/// What one agent perceives at a step: occupancy patch, heading with step
/// index, and position.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub vision: Vec<f64>,
    pub heading: Heading,
    pub step: usize,
    pub horizon: usize,
    pub position: [f64; 3],
}

/// Network-ready encoding of an [`Observation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsFeatures {
    pub vision: Vec<f64>,
    pub azimuth: [f64; 3],
    pub position: [f64; 3],
}

impl Observation {
    /// Heading as `(sin, cos)`; step as `t / T`, or raw `t` with `raw_step`.
    pub fn features(&self, raw_step: bool) -> ObsFeatures {
        let a = self.heading.radians();
        let t = if raw_step {
            self.step as f64
        } else {
            self.step as f64 / self.horizon.max(1) as f64
        };
        ObsFeatures {
            vision: self.vision.clone(),
            azimuth: [a.sin(), a.cos(), t],
            position: self.position.map(|p| p / POSITION_SCALE),
        }
    }
}

impl ObsFeatures {
    pub fn zeros(vision_len: usize) -> Self {
        ObsFeatures { vision: vec![0.0; vision_len], azimuth: [0.0; 3], position: [0.0; 3] }
    }
}

/// A batch of observation features split by modality.
#[derive(Debug, Clone)]
pub struct EncoderInput {
    pub vision: Tensor2,
    pub azimuth: Tensor2,
    pub position: Tensor2,
}

impl EncoderInput {
    pub fn from_features<'a, I>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ObsFeatures>,
    {
        let items: Vec<&ObsFeatures> = items.into_iter().collect();
        let vision: Vec<&[f64]> = items.iter().map(|f| f.vision.as_slice()).collect();
        let azimuth: Vec<&[f64]> = items.iter().map(|f| f.azimuth.as_slice()).collect();
        let position: Vec<&[f64]> = items.iter().map(|f| f.position.as_slice()).collect();
        if items.is_empty() {
            return Err(Error::config("empty observation batch"));
        }
        Ok(EncoderInput {
            vision: Tensor2::from_rows(&vision)?,
            azimuth: Tensor2::from_rows(&azimuth)?,
            position: Tensor2::from_rows(&position)?,
        })
    }

    pub fn batch(&self) -> usize {
        self.vision.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderWidths {
    pub vision: usize,
    pub azimuth: usize,
    pub position: usize,
}

impl EncoderWidths {
    pub fn total(&self) -> usize {
        self.vision + self.azimuth + self.position
    }
}

/// Modality encoders whose outputs are concatenated as `[f^i, f^a, f^p]`.
#[derive(Debug, Clone, Copy)]
pub struct ObsEncoder {
    pub vision: Dense,
    pub azimuth: Dense,
    pub position: Dense,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    vision: DenseOut,
    azimuth: DenseOut,
    position: DenseOut,
    pub out: Tensor2,
}

impl ObsEncoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, patch_len: usize, widths: EncoderWidths, rng: &mut R) -> Result<Self> {
        Ok(ObsEncoder {
            vision: Dense::new(store, &format!("{prefix}.vision"), patch_len, widths.vision, Activation::Relu, rng)?,
            azimuth: Dense::new(store, &format!("{prefix}.azimuth"), 3, widths.azimuth, Activation::Relu, rng)?,
            position: Dense::new(store, &format!("{prefix}.position"), 3, widths.position, Activation::Relu, rng)?,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(ObsEncoder {
            vision: Dense::lookup(store, &format!("{prefix}.vision"), Activation::Relu)?,
            azimuth: Dense::lookup(store, &format!("{prefix}.azimuth"), Activation::Relu)?,
            position: Dense::lookup(store, &format!("{prefix}.position"), Activation::Relu)?,
        })
    }

    pub fn output_width(&self) -> usize {
        self.vision.outputs + self.azimuth.outputs + self.position.outputs
    }

    pub fn forward(&self, store: &ParamStore, input: &EncoderInput) -> Result<EncoderCache> {
        let vision = self.vision.forward(store, &input.vision)?;
        let azimuth = self.azimuth.forward(store, &input.azimuth)?;
        let position = self.position.forward(store, &input.position)?;
        let out = Tensor2::hcat(&[&vision.out, &azimuth.out, &position.out])?;
        Ok(EncoderCache { vision, azimuth, position, out })
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &EncoderCache, d_out: &Tensor2) {
        let (v, a) = (self.vision.outputs, self.azimuth.outputs);
        let p = self.position.outputs;
        self.vision.backward(store, &cache.vision, &d_out.columns(0, v), false);
        self.azimuth.backward(store, &cache.azimuth, &d_out.columns(v, a), false);
        self.position.backward(store, &cache.position, &d_out.columns(v + a, p), false);
    }
}
