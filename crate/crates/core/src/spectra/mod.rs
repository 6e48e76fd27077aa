//! Residual spectra: denoise, subtract, average, transform, render.

pub mod fft;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixels::{gaussian_blur, median3, Image, Plane};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum DenoiseMethod {
    Median3,
    Gaussian { sigma: f64 },
    External { model: String },
}

impl Default for DenoiseMethod {
    fn default() -> Self {
        DenoiseMethod::Median3
    }
}

impl core::fmt::Display for DenoiseMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DenoiseMethod::Median3 => f.write_str("median3"),
            DenoiseMethod::Gaussian { sigma } => write!(f, "gaussian({sigma})"),
            DenoiseMethod::External { model } => write!(f, "external({model})"),
        }
    }
}

/// Three float channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub channels: [Plane; 3],
}

impl FloatImage {
    pub fn from_image(img: &Image) -> Self {
        Self {
            channels: [0, 1, 2].map(|c| img.channel(c).map(|v| v / 255.0)),
        }
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }
}

/// Classical denoisers only; the external slot reports itself unavailable.
pub fn denoise(img: &Image, method: &DenoiseMethod) -> Result<FloatImage> {
    let src = FloatImage::from_image(img);
    let channels = match method {
        DenoiseMethod::Median3 => src.channels.each_ref().map(median3),
        DenoiseMethod::Gaussian { sigma } => {
            if !(*sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config(format!(
                    "denoise: sigma must be finite and non-negative, got {sigma}"
                )));
            }
            src.channels.each_ref().map(|p| gaussian_blur(p, *sigma))
        }
        DenoiseMethod::External { model } => {
            return Err(Error::Unavailable(format!("external denoiser `{model}`")));
        }
    };
    Ok(FloatImage { channels })
}

/// Channel mean of `img/255 − denoised`.
pub fn residual(img: &Image, denoised: &FloatImage) -> Result<Plane> {
    if img.width() != denoised.width() || img.height() != denoised.height() {
        return Err(Error::DimMismatch {
            expected: img.width() * img.height(),
            found: denoised.width() * denoised.height(),
        });
    }
    let src = FloatImage::from_image(img);
    Ok(Plane::from_fn(img.width(), img.height(), |x, y| {
        (0..3)
            .map(|c| src.channels[c].at(x, y) - denoised.channels[c].at(x, y))
            .sum::<f64>()
            / 3.0
    }))
}

/// Running mean of residual grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStack {
    count: usize,
    mean: Option<Plane>,
    source: String,
}

impl ResidualStack {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            count: 0,
            mean: None,
            source: source.into(),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<&Plane> {
        self.mean.as_ref()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn accumulate(&mut self, r: &Plane) -> Result<()> {
        if let Some(i) = r.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("residual cell {i}")));
        }
        match &mut self.mean {
            None => self.mean = Some(r.clone()),
            Some(m) => {
                if !m.same_dims(r) {
                    return Err(Error::DimMismatch {
                        expected: m.data.len(),
                        found: r.data.len(),
                    });
                }
                let n = (self.count + 1) as f64;
                for (a, b) in m.data.iter_mut().zip(&r.data) {
                    *a += (b - *a) / n;
                }
            }
        }
        self.count += 1;
        Ok(())
    }
}

/// DC-centered magnitude and phase, row-major `height × width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// 2-D DFT of a grid with the zero frequency moved to `(height/2, width/2)`.
pub fn fft2_spectrum(grid: &Plane) -> Result<Spectrogram> {
    let (w, h) = (grid.width, grid.height);
    if w < 2 || h < 2 {
        return Err(Error::Config(format!(
            "spectrum: grid must be at least 2x2, got {w}x{h}"
        )));
    }
    let mut data: Vec<Complex64> = grid.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft2(&mut data, w, h);
    let mut magnitude = alloc::vec![0.0; w * h];
    let mut phase = alloc::vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = data[y * w + x];
            let dst = ((y + h / 2) % h) * w + (x + w / 2) % w;
            magnitude[dst] = v.norm();
            let p = v.arg();
            phase[dst] = if p <= -PI { PI } else { p };
        }
    }
    Ok(Spectrogram {
        width: w,
        height: h,
        magnitude,
        phase,
    })
}

impl Spectrogram {
    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }

    /// `round(255 · ln(1+m) / ln(1+max))` per cell; all zero when max is 0.
    pub fn render(&self) -> Vec<u8> {
        let max = self.max_magnitude();
        if max == 0.0 {
            return alloc::vec![0; self.magnitude.len()];
        }
        let denom = libm::log1p(max);
        self.magnitude
            .iter()
            .map(|&m| libm::round(255.0 * libm::log1p(m) / denom).clamp(0.0, 255.0) as u8)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub count: usize,
    pub method: String,
    pub dims: [usize; 2],
    pub max_magnitude: f64,
}
