use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half the interaural distance, in meters.
pub const EAR_OFFSET: f64 = 0.09;
/// Peak magnitude after normalization.
pub const PEAK_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    /// Absorption of `[x=0, x=W, y=0, y=D, z=0, z=H]`, each in (0, 1].
    pub absorption: [f64; 6],
    pub speed_of_sound: f64,
    pub max_order: u32,
    pub sample_rate: u32,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec {
            width: 5.0,
            depth: 4.0,
            height: 3.0,
            absorption: [0.5; 6],
            speed_of_sound: 343.0,
            max_order: 8,
            sample_rate: 16_000,
        }
    }
}

impl RoomSpec {
    pub fn dims(&self) -> [f64; 3] {
        [self.width, self.depth, self.height]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims().iter().all(|d| *d > 0.0 && d.is_finite()) {
            return Err(Error::config("room dimensions must be > 0"));
        }
        if !self.absorption.iter().all(|a| *a > 0.0 && *a <= 1.0) {
            return Err(Error::config("absorption coefficients must lie in (0, 1]"));
        }
        if !(self.speed_of_sound > 0.0) || self.sample_rate == 0 {
            return Err(Error::config("speed of sound and sample rate must be > 0"));
        }
        Ok(())
    }

    pub fn contains_strictly(&self, p: [f64; 3]) -> bool {
        p.iter().zip(self.dims()).all(|(&x, d)| x > 0.0 && x < d)
    }

    /// Pressure reflection factor `sqrt(1 - α)` per surface.
    fn reflection(&self) -> [f64; 6] {
        self.absorption.map(|a| (1.0 - a).max(0.0).sqrt())
    }
}

/// Listener position and facing direction (radians, counter-clockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Listener {
    pub position: [f64; 3],
    pub heading: f64,
}

/// Left and right ear positions: ±[`EAR_OFFSET`] perpendicular to the heading.
pub fn ear_positions(listener: &Listener) -> [[f64; 3]; 2] {
    let left = [-listener.heading.sin(), listener.heading.cos()];
    let p = listener.position;
    [
        [p[0] + EAR_OFFSET * left[0], p[1] + EAR_OFFSET * left[1], p[2]],
        [p[0] - EAR_OFFSET * left[0], p[1] - EAR_OFFSET * left[1], p[2]],
    ]
}

/// A mirrored virtual source with its reflection order and accumulated
/// reflection factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    pub order: u32,
    pub gain: f64,
}

/// All image sources of order `≤ max_order` within `max_distance` of the
/// room (pass `f64::INFINITY` for no distance bound).
pub fn image_sources(room: &RoomSpec, source: [f64; 3], max_order: u32, max_distance: f64) -> Vec<ImageSource> {
    let beta = room.reflection();
    let dims = room.dims();
    let n = max_order as i64;
    let range: [i64; 3] = std::array::from_fn(|a| {
        if max_distance.is_finite() {
            n.min((max_distance / (2.0 * dims[a])).ceil() as i64 + 1)
        } else {
            n
        }
    });
    let mut out = Vec::new();
    for mx in -range[0]..=range[0] {
        for my in -range[1]..=range[1] {
            for mz in -range[2]..=range[2] {
                let m = [mx, my, mz];
                for parity in 0..8u32 {
                    let u = [(parity & 1) as i64, ((parity >> 1) & 1) as i64, ((parity >> 2) & 1) as i64];
                    let mut order = 0u32;
                    let mut gain = 1.0;
                    let mut position = [0.0; 3];
                    for a in 0..3 {
                        let low = (m[a] - u[a]).unsigned_abs() as u32;
                        let high = m[a].unsigned_abs() as u32;
                        order += low + high;
                        gain *= beta[2 * a].powi(low as i32) * beta[2 * a + 1].powi(high as i32);
                        position[a] = (1 - 2 * u[a]) as f64 * source[a] + 2.0 * m[a] as f64 * dims[a];
                    }
                    if order <= max_order {
                        out.push(ImageSource { position, order, gain });
                    }
                }
            }
        }
    }
    out
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Un-normalized two-channel response: each image contributes
/// `gain / (4π r)` at delay `r / c`, split linearly between the two nearest
/// samples.
pub fn image_source_raw(room: &RoomSpec, source: [f64; 3], listener: &Listener, length: usize) -> Result<[Vec<f64>; 2]> {
    room.validate()?;
    let ears = ear_positions(listener);
    if !room.contains_strictly(source) {
        return Err(Error::domain(format!("source {source:?} is outside the room")));
    }
    if !room.contains_strictly(listener.position) || !ears.iter().all(|e| room.contains_strictly(*e)) {
        return Err(Error::domain(format!("listener {:?} is outside the room", listener.position)));
    }
    let fs = room.sample_rate as f64;
    let max_distance = length as f64 / fs * room.speed_of_sound
        + distance(listener.position, [0.0; 3]).max(distance(listener.position, room.dims()));
    let images = image_sources(room, source, room.max_order, max_distance);
    let mut channels = [vec![0.0; length], vec![0.0; length]];
    for (ear, h) in ears.iter().zip(channels.iter_mut()) {
        for img in &images {
            let r = distance(img.position, *ear);
            let delay = r / room.speed_of_sound * fs;
            let i0 = delay.floor();
            if i0 < 0.0 || i0 >= length as f64 {
                continue;
            }
            let i0 = i0 as usize;
            let frac = delay - i0 as f64;
            let amp = img.gain / (4.0 * PI * r);
            h[i0] += amp * (1.0 - frac);
            if i0 + 1 < length {
                h[i0 + 1] += amp * frac;
            }
        }
    }
    Ok(channels)
}

/// Two-channel impulse response stored as 32-bit samples, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinauralRIR {
    pub sample_rate: u32,
    samples: Vec<f32>,
    /// Factor applied by peak normalization (1 when not normalized).
    pub scale: f64,
}

impl BinauralRIR {
    pub fn from_channels(sample_rate: u32, left: &[f32], right: &[f32]) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::domain("binaural channels differ in length"));
        }
        if !left.iter().chain(right).all(|v| v.is_finite()) {
            return Err(Error::domain("non-finite RIR sample"));
        }
        let mut samples = Vec::with_capacity(2 * left.len());
        samples.extend_from_slice(left);
        samples.extend_from_slice(right);
        Ok(BinauralRIR { sample_rate, samples, scale: 1.0 })
    }

    /// From a channel-major `2 x L` buffer.
    pub fn from_interleaved_channels(sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        if samples.len() % 2 != 0 {
            return Err(Error::domain("odd sample count for a two-channel RIR"));
        }
        let l = samples.len() / 2;
        Self::from_channels(sample_rate, &samples[..l], &samples[l..])
    }

    pub fn from_f64(sample_rate: u32, samples: &[f64]) -> Result<Self> {
        Self::from_interleaved_channels(sample_rate, samples.iter().map(|&v| v as f32).collect())
    }

    pub fn zeros(sample_rate: u32, length: usize) -> Self {
        BinauralRIR { sample_rate, samples: vec![0.0; 2 * length], scale: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let l = self.len();
        &self.samples[c * l..(c + 1) * l]
    }

    pub fn channel_f64(&self, c: usize) -> Vec<f64> {
        self.channel(c).iter().map(|&v| v as f64).collect()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&v| v as f64).collect()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs() as f64))
    }
}

/// Image-source binaural RIR, peak-normalized to [`PEAK_LEVEL`].
pub fn image_source_rir(room: &RoomSpec, source: [f64; 3], listener: &Listener, length: usize) -> Result<BinauralRIR> {
    let [left, right] = image_source_raw(room, source, listener, length)?;
    let peak = left.iter().chain(&right).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { PEAK_LEVEL / peak } else { 1.0 };
    let conv = |h: &[f64]| -> Vec<f32> { h.iter().map(|v| (v * scale) as f32).collect() };
    let mut rir = BinauralRIR::from_channels(room.sample_rate, &conv(&left), &conv(&right))?;
    rir.scale = scale;
    Ok(rir)
}

/// Maps samples from `[-1, 1]` to `[0, 1]` via `(x + 1) / 2`.
pub fn rir_to_unit_interval(rir: &BinauralRIR) -> Result<Vec<f32>> {
    if let Some(v) = rir.samples().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("RIR sample {v} outside [-1, 1]")));
    }
    Ok(rir.samples().iter().map(|&x| (x + 1.0) * 0.5).collect())
}

/// Inverse of [`rir_to_unit_interval`]: `u ↦ 2u - 1`.
pub fn rir_from_unit_interval(sample_rate: u32, unit: &[f32]) -> Result<BinauralRIR> {
    if let Some(v) = unit.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("value {v} outside [0, 1]")));
    }
    BinauralRIR::from_interleaved_channels(sample_rate, unit.iter().map(|&u| 2.0 * u - 1.0).collect())
}
