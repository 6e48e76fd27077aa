//! Training-time augmentation: random area-scaled crop, resize, optional
//! Gaussian blur, optional JPEG re-compression.

use alloc::format;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filter::gaussian_blur;
use super::image::{resize_bilinear, Image};
use crate::error::{Error, Result};

/// In-memory JPEG encode/decode at a given quality.
pub trait JpegCodec {
    fn jpeg_cycle(&self, img: &Image, quality: u8) -> Result<Image>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub out_size: usize,
    pub crop_scale_range: [f64; 2],
    pub blur_prob: f64,
    pub blur_sigma_range: [f64; 2],
    pub jpeg_prob: f64,
    pub jpeg_quality_range: [u8; 2],
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            out_size: 224,
            crop_scale_range: [0.64, 1.0],
            blur_prob: 0.5,
            blur_sigma_range: [0.0, 3.0],
            jpeg_prob: 0.5,
            jpeg_quality_range: [30, 100],
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("augment: {what}")));
        if self.out_size == 0 {
            return bad("out_size must be positive");
        }
        for (name, p) in [("blur_prob", self.blur_prob), ("jpeg_prob", self.jpeg_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        let [lo, hi] = self.crop_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad("crop_scale_range must satisfy 0 < lo <= hi <= 1");
        }
        let [lo, hi] = self.blur_sigma_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad("blur_sigma_range must satisfy 0 <= lo <= hi");
        }
        let [lo, hi] = self.jpeg_quality_range;
        if !(1 <= lo && lo <= hi && hi <= 100) {
            return bad("jpeg_quality_range must satisfy 1 <= lo <= hi <= 100");
        }
        Ok(())
    }
}

/// The concrete random choices for one augmentation call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub crop: (usize, usize, usize, usize),
    pub blur_sigma: Option<f64>,
    pub jpeg_quality: Option<u8>,
}

impl AugmentDraw {
    /// Always consumes exactly seven uniform draws, in pipeline order,
    /// whatever the branch outcomes.
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, width: usize, height: usize, rng: &mut R) -> Self {
        let u: [f64; 7] = core::array::from_fn(|_| rng.random::<f64>());
        let [lo, hi] = cfg.crop_scale_range;
        let side = libm::sqrt(lo + u[0] * (hi - lo));
        let cw = (libm::round(width as f64 * side) as usize).clamp(1, width);
        let ch = (libm::round(height as f64 * side) as usize).clamp(1, height);
        let x0 = ((u[1] * (width - cw + 1) as f64) as usize).min(width - cw);
        let y0 = ((u[2] * (height - ch + 1) as f64) as usize).min(height - ch);
        let [slo, shi] = cfg.blur_sigma_range;
        let blur_sigma = (u[3] < cfg.blur_prob).then(|| slo + u[4] * (shi - slo));
        let [qlo, qhi] = cfg.jpeg_quality_range;
        let span = f64::from(qhi - qlo) + 1.0;
        let q = (qlo as usize + (u[6] * span) as usize).min(qhi as usize) as u8;
        let jpeg_quality = (u[5] < cfg.jpeg_prob).then_some(q);
        Self {
            crop: (x0, y0, cw, ch),
            blur_sigma,
            jpeg_quality,
        }
    }

    pub fn apply<J: JpegCodec + ?Sized>(&self, img: &Image, out_size: usize, codec: &J) -> Result<Image> {
        let (x0, y0, w, h) = self.crop;
        let mut out = resize_bilinear(&img.crop(x0, y0, w, h), out_size, out_size);
        if let Some(sigma) = self.blur_sigma.filter(|&s| s > 0.0) {
            let planes = [0, 1, 2].map(|c| gaussian_blur(&out.channel(c), sigma));
            out = Image::from_channels(&planes);
        }
        if let Some(q) = self.jpeg_quality {
            out = codec.jpeg_cycle(&out, q)?;
        }
        Ok(out)
    }
}

pub fn augment<R, J>(img: &Image, cfg: &AugmentConfig, rng: &mut R, codec: &J) -> Result<Image>
where
    R: Rng + ?Sized,
    J: JpegCodec + ?Sized,
{
    if img.width() < 8 || img.height() < 8 {
        return Err(Error::Config("augment: image must be at least 8x8".into()));
    }
    AugmentDraw::sample(cfg, img.width(), img.height(), rng).apply(img, cfg.out_size, codec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixels::filter::gaussian_kernel;
    use crate::rng;

    /// Stands in for a codec; counts calls by inverting the image.
    struct Invert;

    impl JpegCodec for Invert {
        fn jpeg_cycle(&self, img: &Image, _quality: u8) -> Result<Image> {
            Image::new(img.width(), img.height(), img.data().iter().map(|v| 255 - v).collect())
        }
    }

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut r = rng::stream(seed, 0);
        Image::from_fn(w, h, |_, _| [r.random(), r.random(), r.random()])
    }

    #[test]
    fn disabled_pipeline_is_identity() {
        let cfg = AugmentConfig {
            crop_scale_range: [1.0, 1.0],
            blur_prob: 0.0,
            jpeg_prob: 0.0,
            ..AugmentConfig::default()
        };
        let img = noise(224, 224, 3);
        let out = augment(&img, &cfg, &mut rng::stream(1, 0), &Invert).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = AugmentConfig::default();
        let img = noise(64, 48, 5);
        let a = augment(&img, &cfg, &mut rng::stream(9, 0), &Invert).unwrap();
        let b = augment(&img, &cfg, &mut rng::stream(9, 0), &Invert).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (224, 224));
    }

    #[test]
    fn draws_consumed_regardless_of_branches() {
        let never = AugmentConfig {
            blur_prob: 0.0,
            jpeg_prob: 0.0,
            ..AugmentConfig::default()
        };
        let always = AugmentConfig {
            blur_prob: 1.0,
            jpeg_prob: 1.0,
            ..AugmentConfig::default()
        };
        let mut r1 = rng::stream(4, 0);
        let mut r2 = rng::stream(4, 0);
        let d1 = AugmentDraw::sample(&never, 100, 80, &mut r1);
        let d2 = AugmentDraw::sample(&always, 100, 80, &mut r2);
        assert_eq!(d1.crop, d2.crop);
        assert!(d1.blur_sigma.is_none() && d2.blur_sigma.is_some());
        assert_eq!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn draws_respect_ranges() {
        let cfg = AugmentConfig::default();
        let mut r = rng::stream(11, 0);
        for _ in 0..500 {
            let d = AugmentDraw::sample(&cfg, 50, 40, &mut r);
            let (x0, y0, w, h) = d.crop;
            assert!(x0 + w <= 50 && y0 + h <= 40);
            let area = (w * h) as f64 / 2000.0;
            assert!(area > 0.6 && area <= 1.0, "{area}");
            if let Some(s) = d.blur_sigma {
                assert!((0.0..=3.0).contains(&s));
            }
            if let Some(q) = d.jpeg_quality {
                assert!((30..=100).contains(&q));
            }
        }
    }

    #[test]
    fn blur_stage_on_impulse() {
        let cfg = AugmentConfig {
            crop_scale_range: [1.0, 1.0],
            blur_prob: 1.0,
            blur_sigma_range: [2.0, 2.0],
            jpeg_prob: 0.0,
            out_size: 32,
            seed: 0,
            ..AugmentConfig::default()
        };
        let img = Image::from_fn(32, 32, |x, y| if (x, y) == (16, 16) { [255; 3] } else { [0; 3] });
        let draw = AugmentDraw::sample(&cfg, 32, 32, &mut rng::stream(0, 0));
        assert_eq!(draw.blur_sigma, Some(2.0));
        let out = draw.apply(&img, 32, &Invert).unwrap();
        let k = gaussian_kernel(2.0);
        for dy in -6isize..=6 {
            for dx in -6isize..=6 {
                let want = 255.0 * k[(dx + 6) as usize] * k[(dy + 6) as usize];
                let got = f64::from(out.pixel((16 + dx) as usize, (16 + dy) as usize)[0]);
                assert!((got - want).abs() <= 0.5, "({dx},{dy}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        let bad = AugmentConfig {
            blur_prob: 1.5,
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentConfig {
            jpeg_quality_range: [80, 20],
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
        let small = Image::filled(4, 4, [0; 3]);
        assert!(augment(&small, &AugmentConfig::default(), &mut rng::stream(0, 0), &Invert).is_err());
    }
}
