//! Context-aware placement of the text region inside a background image.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::saliency;
use crate::raster::{box_sum, box_sum_masked, BinaryMask, Grid, IntegralImage, RasterImage, ScalarField};
use crate::texture::nearest_patch_cost;

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutConfig {
    /// Weight of the centre-offset cost.
    pub lambda4: f64,
    pub scales: Vec<f64>,
    pub rotations: Vec<f64>,
    pub enable_scale: bool,
    pub enable_rotation: bool,
    pub enable_multishape: bool,
    /// Window of the local variance cost.
    pub local_patch: usize,
    /// Patch of the coherence cost and the iterations of its search.
    pub coherence_patch: usize,
    pub coherence_iters: usize,
    /// Half-width of the per-shape search neighbourhood.
    pub shape_radius: usize,
    pub max_passes: usize,
    pub seed: u64,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as i64;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            lambda4: 0.5,
            scales: steps(0.8, 1.2, 0.1),
            rotations: steps(-PI / 6.0, PI / 6.0, PI / 60.0),
            enable_scale: false,
            enable_rotation: false,
            enable_multishape: false,
            local_patch: 15,
            coherence_patch: 7,
            coherence_iters: 4,
            shape_radius: 8,
            max_passes: 20,
            seed: 7,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda4.is_finite() && self.lambda4 >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda4 must be >= 0, got {}", self.lambda4)));
        }
        if self.enable_scale && (self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite()))) {
            return Err(Error::InvalidConfig("scale range must be nonempty and positive".into()));
        }
        if self.enable_rotation && (self.rotations.is_empty() || self.rotations.iter().any(|r| !r.is_finite())) {
            return Err(Error::InvalidConfig("rotation range must be nonempty".into()));
        }
        if self.local_patch == 0 || self.coherence_patch < 3 || self.coherence_patch.is_multiple_of(2) {
            return Err(Error::InvalidConfig("variance window must be positive and coherence patch odd >= 3".into()));
        }
        Ok(())
    }

    fn configurations(&self) -> Vec<(f64, f64)> {
        let scales = if self.enable_scale { self.scales.clone() } else { vec![1.0] };
        let rotations = if self.enable_rotation { self.rotations.clone() } else { vec![0.0] };
        let mut out: Vec<(f64, f64)> =
            scales.iter().flat_map(|&s| rotations.iter().map(move |&r| (s, r))).collect();
        // Identity first, then by distance from it, so ties favour the
        // untransformed placement.
        out.sort_by(|a, b| {
            let ka = ((a.0 - 1.0).abs() + a.1.abs(), a.0, a.1);
            let kb = ((b.0 - 1.0).abs() + b.1.abs(), b.0, b.1);
            ka.partial_cmp(&kb).unwrap()
        });
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeOffset {
    pub id: usize,
    pub dx: i64,
    pub dy: i64,
}

/// Chosen region. `(x, y, w, h)` is the scaled rectangle before rotation;
/// the occupied region is that rectangle turned by `rotation_rad` about its
/// centre `(x + (w-1)/2, y + (h-1)/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutPlacement {
    pub x: f64,
    pub y: f64,
    pub w: usize,
    pub h: usize,
    pub scale: f64,
    pub rotation_rad: f64,
    pub per_shape: Vec<ShapeOffset>,
    pub total_cost: f64,
}

impl LayoutPlacement {
    pub fn center(&self) -> (f64, f64) {
        (self.x + (self.w as f64 - 1.0) / 2.0, self.y + (self.h as f64 - 1.0) / 2.0)
    }

    /// Background position of rectangle-local pixel `(i, j)`.
    pub fn map_point(&self, i: f64, j: f64) -> (f64, f64) {
        let (cx, cy) = self.center();
        let (u, v) = (i - (self.w as f64 - 1.0) / 2.0, j - (self.h as f64 - 1.0) / 2.0);
        let (s, c) = self.rotation_rad.sin_cos();
        (cx + c * u - s * v, cy + s * u + c * v)
    }

    /// Integer top-left corner; exact for unrotated placements.
    pub fn origin(&self) -> (usize, usize) {
        (self.x.round().max(0.0) as usize, self.y.round().max(0.0) as usize)
    }
}

/// Local intensity variance over a `window` square (clipped at the
/// borders), min-max normalized.
pub fn cost_variance(image: &RasterImage, window: usize) -> ScalarField {
    let g = image.intensity();
    let (w, h) = g.dims();
    let s1 = IntegralImage::new(&g);
    let s2 = IntegralImage::new(&g.map(|v| v * v));
    let r = window / 2;
    let var = Grid::from_fn(w, h, |x, y| {
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + window - r).min(w), (y + window - r).min(h));
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let m = s1.sum(x0, y0, x1, y1) / n;
        (s2.sum(x0, y0, x1, y1) / n - m * m).max(0.0)
    });
    var.normalized()
}

pub fn cost_saliency(image: &RasterImage) -> ScalarField {
    saliency(image).normalized()
}

/// Mean squared Lab difference of each background patch to its approximate
/// nearest style patch, min-max normalized.
pub fn cost_coherence(image: &RasterImage, style: &RasterImage, patch: usize, iters: usize, seed: u64) -> Result<ScalarField> {
    Ok(nearest_patch_cost(&image.to_lab(), &style.to_lab(), patch, iters, seed)?.normalized())
}

/// `1 - exp(-d^2 / 2 sigma^2)` with `d` the offset to the image centre and
/// `sigma` the short side.
pub fn cost_aesthetics(width: usize, height: usize) -> ScalarField {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let sigma = width.min(height) as f64;
    Grid::from_fn(width, height, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        1.0 - (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

#[derive(Clone, Debug)]
pub struct CostMaps {
    pub variance: ScalarField,
    pub saliency: ScalarField,
    pub coherence: ScalarField,
    pub aesthetics: ScalarField,
}

impl CostMaps {
    pub fn compute(image: &RasterImage, style: &RasterImage, cfg: &LayoutConfig) -> Result<Self> {
        let ((variance, saliency), (coherence, aesthetics)) = rayon::join(
            || (cost_variance(image, cfg.local_patch), cost_saliency(image)),
            || {
                (
                    cost_coherence(image, style, cfg.coherence_patch, cfg.coherence_iters, cfg.seed),
                    cost_aesthetics(image.width(), image.height()),
                )
            },
        );
        Ok(CostMaps {
            variance,
            saliency,
            coherence: coherence?,
            aesthetics,
        })
    }

    /// `U_v + U_s + U_c + lambda4 U_a`.
    pub fn combined(&self, lambda4: f64) -> ScalarField {
        let (w, h) = self.variance.dims();
        Grid::from_fn(w, h, |x, y| {
            self.variance.get(x, y) + self.saliency.get(x, y) + self.coherence.get(x, y) + lambda4 * self.aesthetics.get(x, y)
        })
    }
}

/// Relative slack under which two window costs count as tied.
const TIE_EPS: f64 = 1e-9;

fn better(v: f64, best: f64) -> bool {
    v < best - TIE_EPS * best.abs().max(1.0)
}

/// Lexicographically first (row, column) minimum of a grid of optional values.
fn argmin(grid: &Grid<Option<f64>>) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if let Some(v) = *grid.get(x, y) {
                if best.is_none_or(|b| better(v, b.2)) {
                    best = Some((x, y, v));
                }
            }
        }
    }
    best
}

fn scaled_dims(dims: (usize, usize), scale: f64) -> (usize, usize) {
    (((dims.0 as f64 * scale).round() as usize).max(1), ((dims.1 as f64 * scale).round() as usize).max(1))
}

/// `cost` rotated so that a window axis-aligned in the returned canvas is a
/// window turned by `angle` in `cost`. Also returns the validity mask and the
/// canvas and cost centres.
fn rotated_canvas(cost: &ScalarField, angle: f64) -> (ScalarField, BinaryMask, (f64, f64)) {
    let (w, h) = cost.dims();
    let (s, c) = angle.sin_cos();
    let cw = (w as f64 * c.abs() + h as f64 * s.abs()).ceil() as usize + 2;
    let ch = (w as f64 * s.abs() + h as f64 * c.abs()).ceil() as usize + 2;
    let (ucx, ucy) = ((cw as f64 - 1.0) / 2.0, (ch as f64 - 1.0) / 2.0);
    let (icx, icy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut valid = BinaryMask::filled(cw, ch, false);
    let vals = Grid::from_fn(cw, ch, |u, v| {
        let (du, dv) = (u as f64 - ucx, v as f64 - ucy);
        let x = icx + c * du - s * dv;
        let y = icy + s * du + c * dv;
        let eps = 1e-9;
        if x >= -eps && y >= -eps && x <= w as f64 - 1.0 + eps && y <= h as f64 - 1.0 + eps {
            valid.set(u, v, true);
            cost.sample_bilinear(x.clamp(0.0, w as f64 - 1.0), y.clamp(0.0, h as f64 - 1.0))
        } else {
            0.0
        }
    });
    (vals, valid, (ucx - icx, ucy - icy))
}

/// Best placement for one (scale, rotation) pair: mean cost, rectangle
/// top-left before rotation.
fn search_one(cost: &ScalarField, dims: (usize, usize), scale: f64, angle: f64) -> Option<(f64, f64, f64, usize, usize)> {
    let (rw, rh) = scaled_dims(dims, scale);
    let area = (rw * rh) as f64;
    if angle == 0.0 {
        let sums = box_sum(cost, rw, rh).ok()?;
        let (x, y, v) = argmin(&sums)?;
        return Some((v / area, x as f64, y as f64, rw, rh));
    }
    let (canvas, valid, shift) = rotated_canvas(cost, angle);
    let sums = box_sum_masked(&canvas, &valid, rw, rh).ok()?;
    let (ax, ay, v) = argmin(&sums)?;
    // Rectangle centre in canvas coordinates, mapped back into the image.
    let (uc, vc) = (ax as f64 + (rw as f64 - 1.0) / 2.0, ay as f64 + (rh as f64 - 1.0) / 2.0);
    let (w, h) = cost.dims();
    let (icx, icy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (du, dv) = (uc - (icx + shift.0), vc - (icy + shift.1));
    let (s, c) = angle.sin_cos();
    let (cx, cy) = (icx + c * du - s * dv, icy + s * du + c * dv);
    Some((v / area, cx - (rw as f64 - 1.0) / 2.0, cy - (rh as f64 - 1.0) / 2.0, rw, rh))
}

/// Window minimising the mean of `cost` over every enabled scale and
/// rotation. Ties go to the lexicographically first anchor, then to the
/// configuration closest to identity.
pub fn estimate_position_on(cost: &ScalarField, dims: (usize, usize), cfg: &LayoutConfig) -> Result<LayoutPlacement> {
    cfg.validate()?;
    let configs = cfg.configurations();
    let results: Vec<Option<(f64, f64, f64, usize, usize)>> =
        configs.par_iter().map(|&(s, r)| search_one(cost, dims, s, r)).collect();
    let mut best: Option<(LayoutPlacement, f64)> = None;
    for (&(s, r), res) in configs.iter().zip(results) {
        if let Some((v, x, y, w, h)) = res {
            if best.as_ref().is_none_or(|b| better(v, b.1)) {
                let p = LayoutPlacement {
                    x,
                    y,
                    w,
                    h,
                    scale: s,
                    rotation_rad: r,
                    per_shape: Vec::new(),
                    total_cost: v,
                };
                best = Some((p, v));
            }
        }
    }
    best.map(|b| b.0).ok_or(Error::NoValidPlacement)
}

pub fn estimate_position(
    image: &RasterImage,
    style: &RasterImage,
    dims: (usize, usize),
    cfg: &LayoutConfig,
) -> Result<(LayoutPlacement, CostMaps)> {
    cfg.validate()?;
    let maps = CostMaps::compute(image, style, cfg)?;
    let placement = estimate_position_on(&maps.combined(cfg.lambda4), dims, cfg)?;
    Ok((placement, maps))
}

/// One connected shape of the text, in text-image coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeBox {
    pub id: usize,
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
    pub centroid: (f64, f64),
}

/// Connected components of `text`, ordered left to right.
pub fn shape_boxes(text: &BinaryMask) -> Vec<ShapeBox> {
    let (labels, n) = text.connected_components();
    let mut acc = vec![(usize::MAX, usize::MAX, 0usize, 0usize, 0.0, 0.0, 0usize); n];
    for y in 0..text.height() {
        for x in 0..text.width() {
            let l = *labels.get(x, y) as usize;
            if l == 0 {
                continue;
            }
            let a = &mut acc[l - 1];
            a.0 = a.0.min(x);
            a.1 = a.1.min(y);
            a.2 = a.2.max(x);
            a.3 = a.3.max(y);
            a.4 += x as f64;
            a.5 += y as f64;
            a.6 += 1;
        }
    }
    let mut boxes: Vec<ShapeBox> = acc
        .into_iter()
        .filter(|a| a.6 > 0)
        .map(|a| ShapeBox {
            id: 0,
            x0: a.0,
            y0: a.1,
            w: a.2 - a.0 + 1,
            h: a.3 - a.1 + 1,
            centroid: (a.4 / a.6 as f64, a.5 / a.6 as f64),
        })
        .collect();
    boxes.sort_by_key(|a| (a.x0, a.y0));
    for (i, b) in boxes.iter_mut().enumerate() {
        b.id = i;
    }
    boxes
}

/// Outcome of the per-shape descent.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub placement: LayoutPlacement,
    /// Total cost before the first pass and after each pass.
    pub pass_costs: Vec<f64>,
    /// Smallest adjacent-pair distance slack seen after each pass
    /// (distance minus initial distance).
    pub min_slack: Vec<f64>,
}

fn centroid_distance(a: &ShapeBox, da: (i64, i64), b: &ShapeBox, db: (i64, i64)) -> f64 {
    let ax = a.centroid.0 + da.0 as f64;
    let ay = a.centroid.1 + da.1 as f64;
    let bx = b.centroid.0 + db.0 as f64;
    let by = b.centroid.1 + db.1 as f64;
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Lets each shape move within the configured neighbourhood of its initial
/// place to lower the summed cost of its box, while adjacent shapes stay at
/// least as far apart (centroid distance) as initially. Only unrotated
/// placements are refined; shape boxes are scaled with the placement.
pub fn refine_multishape(
    placement: &LayoutPlacement,
    shapes: &[ShapeBox],
    cost: &ScalarField,
    cfg: &LayoutConfig,
) -> Result<Refinement> {
    let (iw, ih) = cost.dims();
    let s = placement.scale;
    let scaled: Vec<ShapeBox> = shapes
        .iter()
        .map(|b| ShapeBox {
            id: b.id,
            x0: (b.x0 as f64 * s).round() as usize,
            y0: (b.y0 as f64 * s).round() as usize,
            w: ((b.w as f64 * s).round() as usize).max(1),
            h: ((b.h as f64 * s).round() as usize).max(1),
            centroid: (b.centroid.0 * s, b.centroid.1 * s),
        })
        .collect();
    let (ox, oy) = placement.origin();
    let ii = IntegralImage::new(cost);
    let box_cost = |b: &ShapeBox, d: (i64, i64)| -> Option<f64> {
        let x = ox as i64 + b.x0 as i64 + d.0;
        let y = oy as i64 + b.y0 as i64 + d.1;
        if x < 0 || y < 0 || x as usize + b.w > iw || y as usize + b.h > ih {
            return None;
        }
        let (x, y) = (x as usize, y as usize);
        Some(ii.sum(x, y, x + b.w, y + b.h))
    };
    let n = scaled.len();
    let mut offsets = vec![(0i64, 0i64); n];
    let initial: Vec<f64> = (1..n)
        .map(|i| centroid_distance(&scaled[i - 1], (0, 0), &scaled[i], (0, 0)))
        .collect();
    let total_area: f64 = scaled.iter().map(|b| (b.w * b.h) as f64).sum();
    let total = |offsets: &[(i64, i64)]| -> f64 {
        scaled.iter().zip(offsets).map(|(b, &d)| box_cost(b, d).unwrap_or(f64::INFINITY)).sum::<f64>() / total_area
    };
    let slack = |offsets: &[(i64, i64)]| -> f64 {
        (1..n)
            .map(|i| centroid_distance(&scaled[i - 1], offsets[i - 1], &scaled[i], offsets[i]) - initial[i - 1])
            .fold(f64::INFINITY, f64::min)
    };
    let mut pass_costs = vec![total(&offsets)];
    let mut min_slack = Vec::new();
    let enabled = placement.rotation_rad == 0.0 && n > 0 && pass_costs[0].is_finite();
    let r = cfg.shape_radius as i64;
    let mut passes = 0;
    while enabled && passes < cfg.max_passes {
        passes += 1;
        let mut moved = false;
        for i in 0..n {
            let cur = offsets[i];
            let mut best = (box_cost(&scaled[i], cur).unwrap_or(f64::INFINITY), cur);
            for dy in -r..=r {
                for dx in -r..=r {
                    let d = (dx, dy);
                    if d == cur {
                        continue;
                    }
                    let Some(v) = box_cost(&scaled[i], d) else { continue };
                    if !better(v, best.0) {
                        continue;
                    }
                    let ok_left = i == 0 || centroid_distance(&scaled[i - 1], offsets[i - 1], &scaled[i], d) >= initial[i - 1] - 1e-9;
                    let ok_right = i + 1 == n || centroid_distance(&scaled[i], d, &scaled[i + 1], offsets[i + 1]) >= initial[i] - 1e-9;
                    if ok_left && ok_right {
                        best = (v, d);
                    }
                }
            }
            if best.1 != cur {
                offsets[i] = best.1;
                moved = true;
            }
        }
        let t = total(&offsets);
        debug_assert!(t <= pass_costs.last().unwrap() + 1e-12);
        pass_costs.push(t);
        min_slack.push(slack(&offsets));
        if !moved {
            break;
        }
    }
    let mut out = placement.clone();
    out.per_shape = scaled.iter().zip(&offsets).map(|(b, &(dx, dy))| ShapeOffset { id: b.id, dx, dy }).collect();
    if enabled {
        out.total_cost = *pass_costs.last().unwrap();
    }
    Ok(Refinement {
        placement: out,
        pass_costs,
        min_slack,
    })
}
