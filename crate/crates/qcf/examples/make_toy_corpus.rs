//! Writes the toy corpus: two concepts, 15 camera-like and 15 generated
//! images each, 64×64 PNG, plus one manifest per (concept, label).
//!
//! Usage: cargo run -p qcf --example make_toy_corpus -- <dir>

use std::path::{Path, PathBuf};

use qcf_core::pixels::Image;
use qcf_core::{rng, DatasetManifest, Label, ManifestEntry};
use rand::Rng;

const SIDE: usize = 64;
const PER_CLASS: usize = 15;

fn clamp(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Soft blobs on a gradient.
fn blobs<R: Rng>(r: &mut R) -> impl Fn(usize, usize) -> [f64; 3] {
    let centers: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            (
                r.random_range(8.0..56.0),
                r.random_range(8.0..56.0),
                r.random_range(6.0..14.0),
                [
                    r.random_range(60.0..200.0),
                    r.random_range(60.0..200.0),
                    r.random_range(60.0..200.0),
                ],
            )
        })
        .collect();
    let base = r.random_range(30.0..90.0);
    move |x, y| {
        let mut c = [base + y as f64 * 0.5; 3];
        for &(cx, cy, rad, col) in &centers {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let w = (-d2 / (2.0 * rad * rad)).exp();
            for k in 0..3 {
                c[k] = c[k] * (1.0 - w) + col[k] * w;
            }
        }
        c
    }
}

/// Oriented sinusoidal stripes.
fn stripes<R: Rng>(r: &mut R) -> impl Fn(usize, usize) -> [f64; 3] {
    let theta: f64 = r.random_range(0.0..std::f64::consts::PI);
    let freq: f64 = r.random_range(0.08..0.2);
    let phase: f64 = r.random_range(0.0..6.28);
    let tint = [
        r.random_range(0.6..1.0),
        r.random_range(0.6..1.0),
        r.random_range(0.6..1.0),
    ];
    move |x, y| {
        let t = (x as f64 * theta.cos() + y as f64 * theta.sin()) * freq + phase;
        let v = 128.0 + 70.0 * t.sin();
        [v * tint[0], v * tint[1], v * tint[2]]
    }
}

fn render<R: Rng>(r: &mut R, concept: &str, fake: bool) -> Image {
    let scene: Box<dyn Fn(usize, usize) -> [f64; 3]> = match concept {
        "blobs" => Box::new(blobs(r)),
        _ => Box::new(stripes(r)),
    };
    // Generated images carry a period-4 grid pattern of varying strength.
    let amp = if fake { r.random_range(4.0..24.0) } else { 0.0 };
    let noise: Vec<f64> = (0..SIDE * SIDE).map(|_| r.random_range(-6.0..6.0)).collect();
    Image::from_fn(SIDE, SIDE, |x, y| {
        let c = scene(x, y);
        let grid = if x % 4 == 0 || y % 4 == 0 { amp } else { -amp / 3.0 };
        let n = noise[y * SIDE + x];
        [clamp(c[0] + grid + n), clamp(c[1] + grid + n), clamp(c[2] + grid + n)]
    })
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/toy".into()));
    for (ci, concept) in ["blobs", "stripes"].into_iter().enumerate() {
        for (li, (label, source)) in [(Label::Real, "camera"), (Label::Fake, "generator")]
            .into_iter()
            .enumerate()
        {
            let kind = if label == Label::Real { "real" } else { "fake" };
            let dir = out.join(concept).join(kind);
            std::fs::create_dir_all(&dir).unwrap();
            let mut r = rng::stream(7, (ci * 2 + li) as u64);
            let mut entries = Vec::new();
            for i in 0..PER_CLASS {
                let img = render(&mut r, concept, label == Label::Fake);
                let name = format!("{i:02}.png");
                save(&img, &dir.join(&name));
                entries.push(ManifestEntry { path: name, label });
            }
            let manifest = DatasetManifest {
                name: format!("{concept}-{kind}"),
                concept: concept.into(),
                source: source.into(),
                image_root: format!("{concept}/{kind}"),
                entries,
            };
            let text = serde_json::to_string_pretty(&manifest).unwrap() + "\n";
            std::fs::write(out.join(format!("{concept}_{kind}.json")), text).unwrap();
        }
    }
}

fn save(img: &Image, path: &Path) {
    image::save_buffer(
        path,
        img.data(),
        SIDE as u32,
        SIDE as u32,
        image::ExtendedColorType::Rgb8,
    )
    .unwrap();
}
