//! Binaural room impulse responses of shoebox rooms by the image-source method.

mod dataset;
mod image_source;

pub use dataset::{RirDataset, RirRecord, DATASET_MAGIC, DATASET_VERSION};
pub use image_source::{
    ear_positions, image_source_raw, image_source_rir, image_sources, rir_from_unit_interval,
    rir_to_unit_interval, BinauralRIR, ImageSource, Listener, RoomSpec, EAR_OFFSET, PEAK_LEVEL,
};
