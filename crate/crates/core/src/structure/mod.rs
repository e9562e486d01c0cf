//! Legibility-preserving structure transfer.
//!
//! Forward: the text mask is rebuilt coarse to fine. At each level the shape
//! synthesis result replaces the text only inside the stroke-end mask `M`, so
//! stroke trunks stay exactly as drawn. Backward: the guidance mask is pulled
//! toward the deformed text with plain multi-level shape synthesis.

mod lss;
mod skeleton;

pub use self::lss::{lss, lss_field, LssParams, NORMAL_BINS};
pub use self::skeleton::{skeletonize, thin, Component, Skeleton};

use crate::error::{Error, Result};
use crate::raster::{binarize, distance_transform, BinaryMask, Grid, Resample, ResampleMethod, ScalarField};

/// Width of the cosine ramp around stroke-end disks, in level pixels.
pub const FEATHER: f64 = 2.0;
/// How far released pixels may grow past the input contour, in stroke radii.
pub const GROW_LIMIT: f64 = 1.0;
/// Fraction of the stroke radius that is never eroded.
pub const CORE_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct StructureConfig {
    /// Index of the coarsest level (`L`); `L + 1` levels in total.
    pub levels: usize,
    /// Long side of the text mask at level `L`.
    pub top_resolution: usize,
    pub boundary_patch: usize,
    pub lss_iterations: usize,
    /// Confine released pixels to a band around the input strokes.
    pub legibility_band: bool,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            levels: 7,
            top_resolution: 64,
            boundary_patch: 9,
            lss_iterations: 5,
            legibility_band: true,
        }
    }
}

impl StructureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_resolution < 32 {
            return Err(Error::InvalidConfig(format!(
                "top resolution must be >= 32, got {}",
                self.top_resolution
            )));
        }
        if self.boundary_patch < 3 || self.boundary_patch.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "boundary patch must be odd and >= 3, got {}",
                self.boundary_patch
            )));
        }
        Ok(())
    }

    pub fn lss_params(&self) -> LssParams {
        LssParams::new(self.boundary_patch, self.lss_iterations)
    }
}

/// Resolution ladder shared by text and guidance masks.
///
/// Level `l` is scaled by `(top / long_side)^(l / L)`, so level `L` has the
/// configured long side whatever `L` is. Images already smaller than the top
/// resolution keep full size at every level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelGeometry {
    pub levels: usize,
    scales: Vec<f64>,
}

impl LevelGeometry {
    pub fn new(width: usize, height: usize, cfg: &StructureConfig) -> Self {
        let long = width.max(height) as f64;
        let ratio = (cfg.top_resolution as f64 / long).min(1.0);
        let scales = (0..=cfg.levels)
            .map(|l| {
                if cfg.levels == 0 {
                    1.0
                } else {
                    ratio.powf(l as f64 / cfg.levels as f64)
                }
            })
            .collect();
        LevelGeometry {
            levels: cfg.levels,
            scales,
        }
    }

    pub fn scale(&self, level: usize) -> f64 {
        self.scales[level]
    }

    pub fn dims(&self, level: usize, width: usize, height: usize) -> (usize, usize) {
        let s = self.scales[level];
        if s == 1.0 {
            return (width, height);
        }
        (
            ((width as f64 * s).round() as usize).max(1),
            ((height as f64 * s).round() as usize).max(1),
        )
    }

    pub fn resize_mask(&self, mask: &BinaryMask, level: usize) -> Result<BinaryMask> {
        let (w, h) = self.dims(level, mask.width(), mask.height());
        mask.resize(w, h, ResampleMethod::Bicubic)
    }
}

fn ramp(excess: f64) -> f64 {
    if excess <= 0.0 {
        1.0
    } else if excess >= FEATHER {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * excess / FEATHER).cos())
    }
}

/// Radius, in level-`level` pixels, of the stroke-end disk at `endpoint` of
/// `component`. Linear in the level index between the mean stroke radius at
/// the top level and the radius covering the component's bounding box at
/// level 0.
pub fn stroke_end_radius(
    skel: &Skeleton,
    component: &Component,
    endpoint: (usize, usize),
    level: usize,
    geom: &LevelGeometry,
) -> f64 {
    let (x0, y0, x1, y1) = component.bbox;
    let (ex, ey) = (endpoint.0 as f64, endpoint.1 as f64);
    let cover = [(x0 as f64 - 0.5, y0 as f64 - 0.5), (x1 as f64 + 0.5, y0 as f64 - 0.5), (x0 as f64 - 0.5, y1 as f64 + 0.5), (x1 as f64 + 0.5, y1 as f64 + 0.5)]
        .iter()
        .map(|&(cx, cy)| ((cx - ex).powi(2) + (cy - ey).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let l_top = geom.levels;
    if l_top == 0 {
        return cover;
    }
    let top = skel.mean_stroke_radius * geom.scale(l_top);
    let t = (l_top - level) as f64 / l_top as f64;
    top + (cover - top) * t
}

/// Stroke-end weight `M` at one level, in [0,1].
///
/// Components without endpoints are excluded for `l > L/2` and fully
/// released (bounding box plus one patch) for `l <= L/2`.
pub fn stroke_end_mask(
    skel: &Skeleton,
    level: usize,
    geom: &LevelGeometry,
    cfg: &StructureConfig,
) -> ScalarField {
    let s = geom.scale(level);
    let (w, h) = geom.dims(level, skel.width, skel.height);
    let to_level = |v: f64| (v + 0.5) * s - 0.5;
    let mut disks = Vec::new();
    let mut boxes = Vec::new();
    for c in &skel.components {
        if c.endpoints.is_empty() {
            if 2 * level <= geom.levels {
                let pad = cfg.boundary_patch as f64;
                boxes.push((
                    to_level(c.bbox.0 as f64) - pad,
                    to_level(c.bbox.1 as f64) - pad,
                    to_level(c.bbox.2 as f64) + pad,
                    to_level(c.bbox.3 as f64) + pad,
                ));
            }
            continue;
        }
        for &e in &c.endpoints {
            let r = stroke_end_radius(skel, c, e, level, geom);
            disks.push((to_level(e.0 as f64), to_level(e.1 as f64), r));
        }
    }
    Grid::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut m: f64 = 0.0;
        for &(cx, cy, r) in &disks {
            let d = ((xf - cx).powi(2) + (yf - cy).powi(2)).sqrt();
            m = m.max(ramp(d - r));
            if m == 1.0 {
                return 1.0;
            }
        }
        for &(bx0, by0, bx1, by1) in &boxes {
            let dx = (bx0 - xf).max(xf - bx1).max(0.0);
            let dy = (by0 - yf).max(yf - by1).max(0.0);
            m = m.max(ramp((dx * dx + dy * dy).sqrt()));
        }
        m
    })
}

/// Per-level record of the forward transfer.
#[derive(Clone, Debug)]
pub struct LevelTrace {
    pub level: usize,
    /// Downsampled text mask `T^(l)`.
    pub text: BinaryMask,
    pub stroke_end: ScalarField,
    /// Result `T̂^(l)`.
    pub result: BinaryMask,
}

#[derive(Clone, Debug)]
pub struct ForwardTransfer {
    pub result: BinaryMask,
    pub skeleton: Skeleton,
    /// Coarsest level first.
    pub trace: Vec<LevelTrace>,
}

pub fn forward_transfer(text: &BinaryMask, guidance: &BinaryMask, cfg: &StructureConfig) -> Result<BinaryMask> {
    forward_transfer_traced(text, guidance, cfg).map(|f| f.result)
}

pub fn forward_transfer_traced(
    text: &BinaryMask,
    guidance: &BinaryMask,
    cfg: &StructureConfig,
) -> Result<ForwardTransfer> {
    cfg.validate()?;
    text.ensure_non_uniform()?;
    guidance.ensure_non_uniform()?;
    let skel = skeletonize(text)?;
    forward_with_skeleton(text, guidance, &skel, cfg, |skel, l, geom| stroke_end_mask(skel, l, geom, cfg))
}

/// Forward transfer with a caller-supplied stroke-end mask per level.
pub fn forward_with_masks(
    text: &BinaryMask,
    guidance: &BinaryMask,
    cfg: &StructureConfig,
    masks: impl Fn(usize, (usize, usize)) -> ScalarField,
) -> Result<ForwardTransfer> {
    cfg.validate()?;
    text.ensure_non_uniform()?;
    guidance.ensure_non_uniform()?;
    let skel = skeletonize(text)?;
    forward_with_skeleton(text, guidance, &skel, cfg, |skel, l, geom| {
        masks(l, geom.dims(l, skel.width, skel.height))
    })
}

fn forward_with_skeleton(
    text: &BinaryMask,
    guidance: &BinaryMask,
    skel: &Skeleton,
    cfg: &StructureConfig,
    mask_at: impl Fn(&Skeleton, usize, &LevelGeometry) -> ScalarField,
) -> Result<ForwardTransfer> {
    let geom = LevelGeometry::new(text.width(), text.height(), cfg);
    let params = cfg.lss_params();
    let half = cfg.boundary_patch / 2;
    let mut prev: Option<BinaryMask> = None;
    let mut trace = Vec::with_capacity(cfg.levels + 1);
    for l in (0..=cfg.levels).rev() {
        let t_l = geom.resize_mask(text, l)?;
        let m = mask_at(skel, l, &geom);
        m.ensure_dims(t_l.dims())?;
        let base = match &prev {
            None => t_l.clone(),
            Some(p) => p.resize(t_l.width(), t_l.height(), ResampleMethod::Bicubic)?,
        };
        let released = m.map(|&v| v > 0.0);
        let synthesized = if released.count_ones() == 0 {
            None
        } else {
            let s_l = geom.resize_mask(guidance, l)?;
            if base.uniform_value().is_some() || s_l.uniform_value().is_some() {
                None
            } else {
                let active = released.dilate(half);
                Some(lss_field(&base, &s_l, &params, Some(&active))?)
            }
        };
        let blended = Grid::from_fn(t_l.width(), t_l.height(), |x, y| {
            let mv = *m.get(x, y);
            let t = if *t_l.get(x, y) { 1.0 } else { 0.0 };
            if mv == 0.0 {
                return t;
            }
            let s = match &synthesized {
                Some(f) => *f.get(x, y),
                None => {
                    if *base.get(x, y) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            mv * s + (1.0 - mv) * t
        });
        let mut result = binarize(&blended, 0.5);
        if cfg.legibility_band {
            clamp_to_band(&mut result, &t_l, &m, skel.mean_stroke_radius * geom.scale(l))?;
        }
        trace.push(LevelTrace {
            level: l,
            text: t_l,
            stroke_end: m,
            result: result.clone(),
        });
        prev = Some(result);
    }
    Ok(ForwardTransfer {
        result: prev.expect("at least one level"),
        skeleton: skel.clone(),
        trace,
    })
}

/// Keeps released pixels within a band around `text`: nothing farther than
/// `GROW_LIMIT` stroke radii outside is set, and the inner core of every
/// stroke stays set, so a stroke can neither vanish nor swallow its
/// surroundings.
fn clamp_to_band(result: &mut BinaryMask, text: &BinaryMask, m: &ScalarField, radius: f64) -> Result<()> {
    if text.uniform_value().is_some() {
        return Ok(());
    }
    let d = distance_transform(text)?;
    let grow = (GROW_LIMIT * radius).max(1.5);
    let core = CORE_FRACTION * radius;
    for (i, r) in result.as_mut_slice().iter_mut().enumerate() {
        if m.as_slice()[i] == 0.0 {
            continue;
        }
        let inside = text.as_slice()[i];
        let dist = d.as_slice()[i];
        if !inside && dist > grow {
            *r = false;
        } else if inside && dist > core {
            *r = true;
        }
    }
    Ok(())
}

/// Deforms the guidance mask toward the structure of `text_hat`.
///
/// Between levels the accumulated deformation (result minus the downsampled
/// input) is upsampled and applied to the next finer input, so an already
/// matching pair passes through unchanged.
pub fn backward_transfer(guidance: &BinaryMask, text_hat: &BinaryMask, cfg: &StructureConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    guidance.ensure_non_uniform()?;
    text_hat.ensure_non_uniform()?;
    let geom = LevelGeometry::new(text_hat.width(), text_hat.height(), cfg);
    let params = cfg.lss_params();
    let mut prev: Option<(BinaryMask, BinaryMask)> = None;
    for l in (0..=cfg.levels).rev() {
        let s_l = geom.resize_mask(guidance, l)?;
        let t_l = geom.resize_mask(text_hat, l)?;
        let target = match &prev {
            None => s_l.clone(),
            Some((hat, base)) => {
                let delta = Grid::from_fn(hat.width(), hat.height(), |x, y| {
                    (*hat.get(x, y) as u8 as f64) - (*base.get(x, y) as u8 as f64)
                });
                let up = delta.resize(s_l.width(), s_l.height(), ResampleMethod::Bicubic)?;
                binarize(
                    &Grid::from_fn(s_l.width(), s_l.height(), |x, y| {
                        (*s_l.get(x, y) as u8 as f64) + up.get(x, y)
                    }),
                    0.5,
                )
            }
        };
        let hat = if target.uniform_value().is_some() || t_l.uniform_value().is_some() {
            target
        } else {
            lss(&target, &t_l, &params)?
        };
        prev = Some((hat, s_l));
    }
    Ok(prev.expect("at least one level").0)
}
