//! Deterministic synthetic corpus: textures with known two-class layouts,
//! glyph masks and smooth backgrounds, plus a checksummed manifest.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::io::{save_mask, save_rgb};
use crate::raster::{gaussian_blur, BinaryMask, ColorSpace, Grid, RasterImage};

pub const MANIFEST_FILE: &str = "manifest.json";

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn noisy(base: [f64; 3], noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> [f64; 3] {
    base.map(|v| (v + noise.sample(rng)).clamp(0.0, 1.0))
}

/// Two colours painted through `mask` with Gaussian noise of std `sigma`.
pub fn paint_two_tone(mask: &BinaryMask, fg: [f64; 3], bg: [f64; 3], sigma: f64, seed: u64) -> RasterImage {
    let mut rng = rng_for(seed, 1);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    RasterImage::from_fn(mask.width(), mask.height(), ColorSpace::Srgb, |x, y| {
        noisy(if *mask.get(x, y) { fg } else { bg }, &noise, &mut rng)
    })
}

/// Smooth random region covering roughly `coverage` of the frame, with
/// features about `scale` pixels wide.
pub fn random_region(w: usize, h: usize, scale: f64, coverage: f64, seed: u64) -> BinaryMask {
    let mut rng = rng_for(seed, 2);
    let white: Grid<f64> = Grid::from_fn(w, h, |_, _| rng.gen());
    let smooth = gaussian_blur(&white, scale / 2.0);
    let mut sorted = smooth.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((1.0 - coverage.clamp(0.0, 1.0)) * (sorted.len() - 1) as f64).round() as usize;
    let t = sorted[idx];
    smooth.map(|&v| v > t)
}

/// Two-tone texture with a known layout; returns the image and the
/// ground-truth foreground.
pub fn two_tone_texture(w: usize, h: usize, sigma: f64, seed: u64) -> (RasterImage, BinaryMask) {
    let truth = random_region(w, h, 14.0, 0.35, seed);
    let image = paint_two_tone(&truth, [0.85, 0.55, 0.15], [0.15, 0.3, 0.6], sigma, seed);
    (image, truth)
}

/// Noisy oriented stripes. `angle` is the stripe normal in radians.
pub fn striped_texture(w: usize, h: usize, period: f64, angle: f64, seed: u64) -> (RasterImage, BinaryMask) {
    let (s, c) = angle.sin_cos();
    let truth = Grid::from_fn(w, h, |x, y| {
        let t = (x as f64 * c + y as f64 * s) / period;
        t - t.floor() < 0.5
    });
    let image = paint_two_tone(&truth, [0.9, 0.85, 0.7], [0.25, 0.15, 0.1], 0.04, seed);
    (image, truth)
}

/// Sparse bright blobs with a colour drift on a dark ground; the blobs are
/// the salient class.
pub fn blob_texture(w: usize, h: usize, count: usize, radius: f64, seed: u64) -> (RasterImage, BinaryMask) {
    let mut rng = rng_for(seed, 3);
    let centers: Vec<(f64, f64)> = (0..count)
        .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
        .collect();
    let truth = Grid::from_fn(w, h, |x, y| {
        centers
            .iter()
            .any(|&(cx, cy)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= radius * radius)
    });
    let noise = Normal::new(0.0, 0.05).expect("finite sigma");
    let image = RasterImage::from_fn(w, h, ColorSpace::Srgb, |x, y| {
        let u = x as f64 / w as f64;
        let base = if *truth.get(x, y) {
            [0.95, 0.5 + 0.3 * u, 0.1]
        } else {
            [0.12, 0.18, 0.3 + 0.1 * u]
        };
        noisy(base, &noise, &mut rng)
    });
    (image, truth)
}

/// Horizontal bar with `margin` pixels free on the left and right.
pub fn bar_glyph(w: usize, h: usize, thickness: usize, margin: usize) -> BinaryMask {
    let top = (h - thickness) / 2;
    Grid::from_fn(w, h, |x, y| (margin..w - margin).contains(&x) && (top..top + thickness).contains(&y))
}

/// A "T" made of a bar and a stem.
pub fn tee_glyph(w: usize, h: usize) -> BinaryMask {
    Grid::from_fn(w, h, |x, y| {
        let bar = y >= h / 5 && y < 2 * h / 5 && x >= w / 6 && x < 5 * w / 6;
        let stem = y >= h / 5 && y < 5 * h / 6 && x >= 2 * w / 5 && x < 3 * w / 5;
        bar || stem
    })
}

/// `n` separate upright strokes of varying height, evenly spaced.
pub fn word_glyph(w: usize, h: usize, n: usize) -> BinaryMask {
    let pitch = w as f64 / n as f64;
    let stroke = (pitch * 0.4).max(2.0);
    Grid::from_fn(w, h, |x, y| {
        let k = (x as f64 / pitch).floor();
        let local = x as f64 - k * pitch;
        let lo = (pitch - stroke) / 2.0;
        let top = if (k as usize).is_multiple_of(2) { h / 6 } else { h / 3 };
        local >= lo && local < lo + stroke && y >= top && y < h - h / 6
    })
}

/// Smooth two-axis colour gradient with a soft bright patch and mild noise.
pub fn gradient_background(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut rng = rng_for(seed, 4);
    let noise = Normal::new(0.0, 0.01).expect("finite sigma");
    let (px, py) = (rng.gen_range(0.2..0.8) * w as f64, rng.gen_range(0.2..0.8) * h as f64);
    let spread = 0.25 * w.min(h) as f64;
    RasterImage::from_fn(w, h, ColorSpace::Srgb, |x, y| {
        let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
        let glow = (-((x as f64 - px).powi(2) + (y as f64 - py).powi(2)) / (2.0 * spread * spread)).exp();
        let base = [
            0.25 + 0.35 * u + 0.2 * glow,
            0.35 + 0.3 * v + 0.15 * glow,
            0.55 + 0.15 * (2.0 * PI * u).cos() * 0.5,
        ];
        noisy(base, &noise, &mut rng)
    })
}

#[derive(Clone, Debug)]
pub enum FixtureData {
    Rgb(RasterImage),
    Mask(BinaryMask),
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub data: FixtureData,
    pub params: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Rgb,
    Mask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub name: String,
    pub kind: FixtureKind,
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub sha256: String,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<FixtureEntry>,
}

fn rgb(name: &str, image: RasterImage, params: serde_json::Value) -> Fixture {
    Fixture { name: name.into(), data: FixtureData::Rgb(image), params }
}

fn mask(name: &str, m: BinaryMask, params: serde_json::Value) -> Fixture {
    Fixture { name: name.into(), data: FixtureData::Mask(m), params }
}

/// The full in-memory corpus for `seed`.
pub fn corpus(seed: u64) -> Vec<Fixture> {
    let mut out = Vec::new();
    for k in 0..10u64 {
        let sigma = 0.005 * (k + 1) as f64;
        let (img, truth) = two_tone_texture(64, 64, sigma, seed.wrapping_add(k));
        let p = json!({ "sigma": sigma, "coverage": 0.35, "scale": 14.0 });
        out.push(rgb(&format!("two_tone_{k:02}"), img, p.clone()));
        out.push(mask(&format!("two_tone_{k:02}_truth"), truth, p));
    }
    let (img, truth) = striped_texture(96, 96, 12.0, 0.0, seed);
    let p = json!({ "period": 12.0, "angle": 0.0 });
    out.push(rgb("stripes", img, p.clone()));
    out.push(mask("stripes_truth", truth, p));
    let (img, truth) = blob_texture(96, 96, 7, 9.0, seed);
    let p = json!({ "count": 7, "radius": 9.0 });
    out.push(rgb("blobs", img, p.clone()));
    out.push(mask("blobs_truth", truth, p));
    out.push(mask("bar", bar_glyph(96, 48, 12, 16), json!({ "thickness": 12, "margin": 16 })));
    out.push(mask("tee", tee_glyph(48, 32), json!({})));
    out.push(mask("word", word_glyph(96, 40, 4), json!({ "strokes": 4 })));
    out.push(rgb("background", gradient_background(160, 128, seed), json!({})));
    out
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the corpus as PNGs plus `manifest.json` into `dir`.
pub fn make_fixtures(dir: impl AsRef<Path>, seed: u64) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut entries = Vec::new();
    for f in corpus(seed) {
        let file = format!("{}.png", f.name);
        let path = dir.join(&file);
        let (kind, (width, height)) = match &f.data {
            FixtureData::Rgb(img) => {
                save_rgb(img, &path)?;
                (FixtureKind::Rgb, img.dims())
            }
            FixtureData::Mask(m) => {
                save_mask(m, &path)?;
                (FixtureKind::Mask, m.dims())
            }
        };
        let bytes = fs::read(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
        entries.push(FixtureEntry {
            name: f.name,
            kind,
            file,
            width,
            height,
            sha256: sha256_hex(&bytes),
            params: f.params,
        });
    }
    let manifest = Manifest { seed, entries };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
    Ok(manifest)
}

/// Checks every manifest entry against the file on disk; returns the names
/// whose checksum differs or whose file is missing.
pub fn verify_fixtures(dir: impl AsRef<Path>, manifest: &Manifest) -> Vec<String> {
    let dir = dir.as_ref();
    manifest
        .entries
        .iter()
        .filter(|e| fs::read(dir.join(&e.file)).map(|b| sha256_hex(&b) != e.sha256).unwrap_or(true))
        .map(|e| e.name.clone())
        .collect()
}
