use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use qcf_core::pixels::{Image, JpegCodec};

use crate::error::{QcfError, Result};

pub fn load_image(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(|source| QcfError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::new(w as usize, h as usize, rgb.into_raw())?)
}

pub fn save_rgb_png(img: &Image, path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|source| QcfError::Decode {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_gray_png(width: usize, height: usize, pixels: &[u8], path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        pixels,
        width as u32,
        height as u32,
        ExtendedColorType::L8,
        ImageFormat::Png,
    )
    .map_err(|source| QcfError::Decode {
        path: path.to_path_buf(),
        source,
    })
}

/// Baseline JPEG encode then decode, in memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct ImageJpeg;

impl JpegCodec for ImageJpeg {
    fn jpeg_cycle(&self, img: &Image, quality: u8) -> qcf_core::Result<Image> {
        let codec = |e: image::ImageError| qcf_core::Error::Codec(e.to_string());
        let mut buf = Vec::new();
        JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
            .encode(
                img.data(),
                img.width() as u32,
                img.height() as u32,
                ExtendedColorType::Rgb8,
            )
            .map_err(codec)?;
        let back = image::load_from_memory_with_format(&buf, ImageFormat::Jpeg)
            .map_err(codec)?
            .to_rgb8();
        let (w, h) = back.dimensions();
        Image::new(w as usize, h as usize, back.into_raw())
    }
}
