//! Guidance map extraction.
//!
//! The style photograph is abstracted in two stages: fine superpixels computed
//! on a texture-free version of the image, then a 2-means split of their mean
//! colours. Saliency decides which of the two clusters is the foreground.

mod kmeans;
mod saliency;
mod smooth;
mod superpixel;

pub use self::kmeans::{two_means, TwoMeans};
pub use self::saliency::{saliency, WORKING_WIDTH};
pub use self::smooth::{smooth_structure, smooth_structure_with, SmoothingParams};
pub use self::superpixel::{superpixels, SuperpixelMap, COMPACTNESS};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Grid, RasterImage, ScalarField};

#[derive(Clone, Debug)]
pub struct GuidanceConfig {
    pub smoothing_strength: f64,
    /// Target superpixel side in pixels.
    pub superpixel_cell: usize,
    pub kmeans_seed: u64,
    /// Cluster count; only 2 is supported.
    pub clusters: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            smoothing_strength: SmoothingParams::default().strength,
            superpixel_cell: 16,
            kmeans_seed: 7,
            clusters: 2,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters != 2 {
            return Err(Error::InvalidConfig(format!(
                "cluster count must be 2, got {}",
                self.clusters
            )));
        }
        if self.superpixel_cell < 4 {
            return Err(Error::InvalidConfig(format!(
                "superpixel cell must be >= 4, got {}",
                self.superpixel_cell
            )));
        }
        if !(self.smoothing_strength > 0.0) || !self.smoothing_strength.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "smoothing strength must be positive, got {}",
                self.smoothing_strength
            )));
        }
        Ok(())
    }
}

/// 2-means over superpixel features, painted back onto pixels.
///
/// Which cluster ends up as `true` is arbitrary; [`pick_foreground`] fixes
/// the orientation.
pub fn cluster_two(map: &SuperpixelMap, seed: u64) -> Result<BinaryMask> {
    if map.count < 2 {
        return Err(Error::DegenerateFeatures);
    }
    let clusters = two_means(&map.features, seed)?;
    Ok(map.labels.map(|&l| clusters.assignment[l as usize] == 1))
}

/// Returns `mask` or its complement so that the foreground has the higher
/// mean saliency. Exact ties keep the input orientation.
pub fn pick_foreground(mask: &BinaryMask, sal: &ScalarField) -> Result<BinaryMask> {
    sal.ensure_dims(mask.dims())?;
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for (&m, &s) in mask.as_slice().iter().zip(sal.as_slice()) {
        if m {
            on += s;
            n_on += 1;
        } else {
            off += s;
            n_off += 1;
        }
    }
    if n_on == 0 || n_off == 0 {
        return Ok(mask.clone());
    }
    let mean_on = on / n_on as f64;
    let mean_off = off / n_off as f64;
    Ok(if mean_off > mean_on {
        mask.complement()
    } else {
        mask.clone()
    })
}

/// Intermediate products of [`extract_guidance`], kept for debug dumps.
#[derive(Clone, Debug)]
pub struct GuidanceProducts {
    pub smoothed: RasterImage,
    pub superpixels: SuperpixelMap,
    pub saliency: ScalarField,
    pub guidance: BinaryMask,
}

pub fn extract_guidance(style: &RasterImage, cfg: &GuidanceConfig) -> Result<BinaryMask> {
    extract_guidance_detailed(style, cfg).map(|p| p.guidance)
}

pub fn extract_guidance_detailed(
    style: &RasterImage,
    cfg: &GuidanceConfig,
) -> Result<GuidanceProducts> {
    cfg.validate()?;
    let smoothed = smooth_structure(style, cfg.smoothing_strength);
    let sp = superpixels(&smoothed, cfg.superpixel_cell)?;
    let clusters = cluster_two(&sp, cfg.kmeans_seed)?;
    let sal = saliency(style);
    let guidance = pick_foreground(&clusters, &sal)?;
    Ok(GuidanceProducts {
        smoothed,
        superpixels: sp,
        saliency: sal,
        guidance,
    })
}

/// Superpixel boundary overlay for debugging: `true` on label changes.
pub fn superpixel_boundaries(map: &SuperpixelMap) -> BinaryMask {
    let (w, h) = map.labels.dims();
    Grid::from_fn(w, h, |x, y| {
        let l = *map.labels.get(x, y);
        (x + 1 < w && *map.labels.get(x + 1, y) != l)
            || (y + 1 < h && *map.labels.get(x, y + 1) != l)
    })
}
