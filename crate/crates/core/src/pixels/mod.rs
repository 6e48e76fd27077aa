//! Images, preprocessing, augmentation and feature extraction.

mod augment;
mod extract;
mod filter;
mod image;

pub use augment::{augment, AugmentConfig, AugmentDraw, JpegCodec};
pub use extract::{extract_features, Extractor, ExtractorConfig, ToyExtractor, DEFAULT_BATCH_SIZE};
pub use filter::{gaussian_blur, gaussian_kernel, median3};
pub use image::{resize_bilinear, resize_plane, Image, Plane};

/// Test-time preprocessing side length.
pub const EVAL_SIZE: usize = 224;
