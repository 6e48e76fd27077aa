use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::image::{resize_plane, Image};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_BATCH_SIZE: usize = 50;

const TOY_SIDE: usize = 32;
const TOY_INPUT: usize = TOY_SIDE * TOY_SIDE;
const PROJECTION_STREAM: u64 = 0x70_726f_6a;

/// Maps images to fixed-length feature vectors.
pub trait Extractor {
    fn dim(&self) -> usize;

    fn extract(&self, img: &Image) -> Result<Vec<f32>>;

    fn extract_batch(&self, imgs: &[Image]) -> Result<Vec<Vec<f32>>> {
        imgs.iter().map(|img| self.extract(img)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtractorConfig {
    Toy { dim: usize, projection_seed: u64 },
    External { dim: usize, model: String },
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig::Toy {
            dim: 64,
            projection_seed: 0,
        }
    }
}

impl ExtractorConfig {
    pub fn dim(&self) -> usize {
        match self {
            ExtractorConfig::Toy { dim, .. } | ExtractorConfig::External { dim, .. } => *dim,
        }
    }
}

/// Grayscale → 32×32 bilinear → [0,1] → fixed Gaussian projection → L2 normalize.
#[derive(Debug, Clone)]
pub struct ToyExtractor {
    dim: usize,
    // dim × 1024, row-major
    projection: Vec<f64>,
}

impl ToyExtractor {
    pub fn new(dim: usize, projection_seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        let mut rng = rng::stream(projection_seed, PROJECTION_STREAM);
        let scale = 1.0 / libm::sqrt(TOY_INPUT as f64);
        let projection = (0..dim * TOY_INPUT)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self { dim, projection })
    }
}

impl Extractor for ToyExtractor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, img: &Image) -> Result<Vec<f32>> {
        let small = resize_plane(&img.grayscale(), TOY_SIDE, TOY_SIDE);
        let input: Vec<f64> = small.data.iter().map(|v| v / 255.0).collect();
        let raw: Vec<f64> = self
            .projection
            .chunks_exact(TOY_INPUT)
            .map(|row| row.iter().zip(&input).map(|(a, b)| a * b).sum())
            .collect();
        let norm = libm::sqrt(raw.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormFeature);
        }
        Ok(raw.iter().map(|v| (v / norm) as f32).collect())
    }
}

/// One vector per image, in input order, processed `batch_size` images at a time.
pub fn extract_features<E: Extractor + ?Sized>(imgs: &[Image], fx: &E, batch_size: usize) -> Result<Vec<Vec<f32>>> {
    let batch_size = batch_size.max(1);
    let mut out = Vec::with_capacity(imgs.len());
    for batch in imgs.chunks(batch_size) {
        for v in fx.extract_batch(batch)? {
            if v.len() != fx.dim() {
                return Err(Error::DimMismatch {
                    expected: fx.dim(),
                    found: v.len(),
                });
            }
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn textured(seed: u64) -> Image {
        let mut r = rng::stream(seed, 1);
        let base: Vec<[u8; 3]> = (0..48 * 40).map(|_| [r.random(), r.random(), r.random()]).collect();
        Image::from_fn(48, 40, |x, y| base[y * 48 + x])
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let fx = ToyExtractor::new(16, 7).unwrap();
        let img = textured(1);
        let v = fx.extract(&img).unwrap();
        let n: f64 = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
        assert_eq!(fx.extract(&img).unwrap(), v);
        let again = ToyExtractor::new(16, 7).unwrap();
        assert_eq!(again.extract(&img).unwrap(), v);
    }

    #[test]
    fn black_image_is_zero_norm_error() {
        let fx = ToyExtractor::new(8, 0).unwrap();
        assert_eq!(fx.extract(&Image::filled(10, 10, [0; 3])), Err(Error::ZeroNormFeature));
    }

    #[test]
    fn batches_preserve_order_and_permute() {
        let fx = ToyExtractor::new(8, 3).unwrap();
        let imgs: Vec<Image> = (0..7).map(textured).collect();
        let a = extract_features(&imgs, &fx, 3).unwrap();
        let b = extract_features(&imgs, &fx, DEFAULT_BATCH_SIZE).unwrap();
        assert_eq!(a, b);
        let perm = [4, 0, 6, 2, 1, 5, 3];
        let shuffled: Vec<Image> = perm.iter().map(|&i| imgs[i].clone()).collect();
        let c = extract_features(&shuffled, &fx, 2).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(c[k], a[i]);
        }
    }

    struct Wrong;
    impl Extractor for Wrong {
        fn dim(&self) -> usize {
            4
        }
        fn extract(&self, _: &Image) -> Result<Vec<f32>> {
            Ok(alloc::vec![0.0; 3])
        }
    }

    #[test]
    fn declared_dim_enforced() {
        let err = extract_features(&[textured(0)], &Wrong, 50).unwrap_err();
        assert_eq!(err, Error::DimMismatch { expected: 4, found: 3 });
    }

    #[test]
    fn shifted_copy_similarity_smoke() {
        // Logged, not asserted.
        let fx = ToyExtractor::new(64, 1).unwrap();
        let img = Image::from_fn(64, 64, |x, y| {
            let v = (128.0 + 100.0 * ((x as f64) / 9.0).sin() * ((y as f64) / 13.0).cos()) as u8;
            [v, v / 2, 255 - v]
        });
        let shifted = Image::from_fn(64, 64, |x, y| img.pixel((x + 1).min(63), y));
        let a = fx.extract(&img).unwrap();
        let b = fx.extract(&shifted).unwrap();
        let cos: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        std::eprintln!("toy extractor cosine(image, 1px shift) = {cos:.4}");
    }
}
