use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use super::energy::{
    energy_distribution, energy_saliency, EnergyTerms, GuidancePack, Planes, Weights,
};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ColorSpace, Grid, RasterImage, ScalarField};

/// Correspondence field from target patch centres to source patch centres,
/// with cached per-patch energies and the source usage histogram.
///
/// Target centres cover `[h, w-h)` x `[h, h_t-h)` for patch half-size `h`,
/// so every patch lies inside the image.
#[derive(Clone, Debug, PartialEq)]
pub struct NNField {
    target_dims: (usize, usize),
    source_dims: (usize, usize),
    patch: usize,
    /// Source pixel index per target centre.
    q: Vec<u32>,
    /// Cached `E_a + l1 E_d + l3 E_s` per target centre.
    unary: Vec<f64>,
    /// Number of target centres mapped to each source pixel.
    usage: Vec<u32>,
}

impl NNField {
    fn half(&self) -> usize {
        self.patch / 2
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn target_dims(&self) -> (usize, usize) {
        self.target_dims
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    /// Dimensions of the grid of target centres.
    pub fn centers_dims(&self) -> (usize, usize) {
        let h = 2 * self.half();
        (self.target_dims.0 - h, self.target_dims.1 - h)
    }

    pub fn n_patches(&self) -> usize {
        self.q.len()
    }

    pub fn center(&self, i: usize) -> (usize, usize) {
        let cw = self.centers_dims().0;
        (i % cw + self.half(), i / cw + self.half())
    }

    fn index(&self, p: (usize, usize)) -> usize {
        (p.1 - self.half()) * self.centers_dims().0 + (p.0 - self.half())
    }

    fn source_xy(&self, idx: u32) -> (usize, usize) {
        let idx = idx as usize;
        (idx % self.source_dims.0, idx / self.source_dims.0)
    }

    /// Source centre matched to target centre `p`.
    pub fn source_of(&self, p: (usize, usize)) -> (usize, usize) {
        self.source_xy(self.q[self.index(p)])
    }

    /// `(target centre, source centre)` pairs in raster order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), (usize, usize))> + '_ {
        (0..self.q.len()).map(|i| (self.center(i), self.source_xy(self.q[i])))
    }

    /// Incrementally maintained usage count of source centre `q`.
    pub fn usage(&self, q: (usize, usize)) -> u32 {
        self.usage[q.1 * self.source_dims.0 + q.0]
    }

    pub fn usage_histogram(&self) -> &[u32] {
        &self.usage
    }

    /// Usage histogram rebuilt from the correspondences.
    pub fn recount(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.usage.len()];
        for &q in &self.q {
            out[q as usize] += 1;
        }
        out
    }

    /// Cached per-patch unary energy at target centre `p`.
    pub fn cached_unary(&self, p: (usize, usize)) -> f64 {
        self.unary[self.index(p)]
    }

    /// Field with explicit correspondences; energies are left at zero until
    /// [`Synthesis::refresh`].
    pub fn from_pairs(
        target_dims: (usize, usize),
        source_dims: (usize, usize),
        patch: usize,
        mut f: impl FnMut((usize, usize)) -> (usize, usize),
    ) -> Result<Self> {
        let half = patch / 2;
        if patch.is_multiple_of(2) || target_dims.0 < patch || target_dims.1 < patch || source_dims.0 < patch || source_dims.1 < patch {
            return Err(Error::InvalidConfig(format!(
                "patch {patch} does not fit target {target_dims:?} and source {source_dims:?}"
            )));
        }
        let mut field = NNField {
            target_dims,
            source_dims,
            patch,
            q: Vec::new(),
            unary: Vec::new(),
            usage: vec![0; source_dims.0 * source_dims.1],
        };
        let (cw, ch) = field.centers_dims();
        for i in 0..cw * ch {
            let p = (i % cw + half, i / cw + half);
            let q = f(p);
            if q.0 < half || q.1 < half || q.0 + half >= source_dims.0 || q.1 + half >= source_dims.1 {
                return Err(Error::OutOfBounds { x: q.0, y: q.1 });
            }
            let idx = (q.1 * source_dims.0 + q.0) as u32;
            field.q.push(idx);
            field.usage[idx as usize] += 1;
        }
        field.unary = vec![0.0; field.q.len()];
        Ok(field)
    }

    /// Sets target centre `p` to source centre `q`, keeping the histogram in step.
    pub fn assign(&mut self, p: (usize, usize), q: (usize, usize)) {
        let i = self.index(p);
        let new = (q.1 * self.source_dims.0 + q.0) as u32;
        self.usage[self.q[i] as usize] -= 1;
        self.usage[new as usize] += 1;
        self.q[i] = new;
    }
}

/// One resolution level of the optimisation: target being synthesised,
/// source exemplar, guidance and weights.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub(crate) target: Planes,
    source: Planes,
    pack: Option<GuidancePack>,
    weights: Weights,
    patch: usize,
    /// Whether each source pixel may serve as a patch centre.
    center_ok: Vec<bool>,
    valid: Vec<u32>,
    valid_fg: Vec<u32>,
    valid_bg: Vec<u32>,
}

impl Synthesis {
    /// `target` and `source` are Lab-encoded images. `usable` marks source
    /// pixels that may be copied; a centre is valid only if its whole patch
    /// is usable. Without a pack only the colour part of the appearance term
    /// is used.
    pub fn new(
        target: &RasterImage,
        source: &RasterImage,
        pack: Option<GuidancePack>,
        weights: Weights,
        patch: usize,
        usable: Option<&BinaryMask>,
    ) -> Result<Self> {
        if patch.is_multiple_of(2) || patch < 3 {
            return Err(Error::InvalidConfig(format!("patch must be odd and >= 3, got {patch}")));
        }
        let (tw, th) = target.dims();
        let (sw, sh) = source.dims();
        if tw < patch || th < patch || sw < patch || sh < patch {
            return Err(Error::InvalidConfig(format!(
                "patch {patch} does not fit target {tw}x{th} or source {sw}x{sh}"
            )));
        }
        let (tmask, smask) = match &pack {
            Some(p) => {
                p.text_hat.ensure_dims((tw, th))?;
                p.guide_hat.ensure_dims((sw, sh))?;
                (p.text_hat.clone(), p.guide_hat.clone())
            }
            None => (BinaryMask::filled(tw, th, false), BinaryMask::filled(sw, sh, false)),
        };
        if let Some(u) = usable {
            u.ensure_dims((sw, sh))?;
        }
        let half = patch / 2;
        let blocked: Option<crate::raster::IntegralImage> =
            usable.map(|u| crate::raster::IntegralImage::new(&u.complement().to_field()));
        let mut center_ok = vec![false; sw * sh];
        let (mut valid, mut valid_fg, mut valid_bg) = (Vec::new(), Vec::new(), Vec::new());
        for y in half..sh - half {
            for x in half..sw - half {
                let ok = blocked
                    .as_ref()
                    .is_none_or(|b| b.sum(x - half, y - half, x + half + 1, y + half + 1) == 0.0);
                if ok {
                    let idx = (y * sw + x) as u32;
                    center_ok[idx as usize] = true;
                    valid.push(idx);
                    if *smask.get(x, y) {
                        valid_fg.push(idx);
                    } else {
                        valid_bg.push(idx);
                    }
                }
            }
        }
        if valid.is_empty() {
            return Err(Error::InvalidConfig("no usable source patch".into()));
        }
        Ok(Synthesis {
            target: Planes::new(target, &tmask),
            source: Planes::new(source, &smask),
            pack,
            weights,
            patch,
            center_ok,
            valid,
            valid_fg,
            valid_bg,
        })
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn weights(&self) -> Weights {
        self.weights
    }

    pub fn pack(&self) -> Option<&GuidancePack> {
        self.pack.as_ref()
    }

    /// Current target as a Lab-encoded image.
    pub fn target_image(&self) -> RasterImage {
        self.target.to_image(ColorSpace::Lab)
    }

    pub fn source_image(&self) -> RasterImage {
        self.source.to_image(ColorSpace::Lab)
    }

    pub fn is_valid_center(&self, q: (usize, usize)) -> bool {
        q.0 < self.source.width && q.1 < self.source.height && self.center_ok[q.1 * self.source.width + q.0]
    }

    /// Overwrites target colours where `fixed` is set.
    pub fn overwrite(&mut self, fixed: &BinaryMask, values: &RasterImage) {
        for (i, (&f, v)) in fixed.as_slice().iter().zip(values.pixels().as_slice()).enumerate() {
            if f {
                let t = &mut self.target.data[i];
                t[0] = v[0];
                t[1] = v[1];
                t[2] = v[2];
            }
        }
    }

    fn guide_terms(&self, p: (usize, usize), q: (usize, usize)) -> (f64, f64) {
        match &self.pack {
            Some(pack) => (energy_distribution(p, q, pack), energy_saliency(p, q, pack)),
            None => (0.0, 0.0),
        }
    }

    /// Appearance term from the planes; stops early once it exceeds `budget`.
    fn appearance(&self, p: (usize, usize), q: (usize, usize), budget: f64) -> f64 {
        let half = self.patch / 2;
        let norm = 3.0 * (self.patch * self.patch) as f64;
        let limit = budget * norm;
        let (tw, sw) = (self.target.width, self.source.width);
        let mut sum = 0.0;
        for dy in 0..self.patch {
            let trow = (p.1 + dy - half) * tw + p.0 - half;
            let srow = (q.1 + dy - half) * sw + q.0 - half;
            let t = &self.target.data[trow..trow + self.patch];
            let s = &self.source.data[srow..srow + self.patch];
            for (a, b) in t.iter().zip(s) {
                let d0 = a[0] - b[0];
                let d1 = a[1] - b[1];
                let d2 = a[2] - b[2];
                let d3 = a[3] - b[3];
                sum += d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
            }
            if sum > limit {
                return f64::INFINITY;
            }
        }
        sum / norm
    }

    /// `E_a + l1 E_d + l3 E_s` for one pair.
    pub fn unary(&self, p: (usize, usize), q: (usize, usize)) -> f64 {
        self.unary_within(p, q, f64::INFINITY)
    }

    fn unary_within(&self, p: (usize, usize), q: (usize, usize), budget: f64) -> f64 {
        let (ed, es) = self.guide_terms(p, q);
        let rest = self.weights.distribution * ed + self.weights.saliency * es;
        if rest >= budget {
            return f64::INFINITY;
        }
        let a = self.appearance(p, q, budget - rest);
        a + rest
    }

    /// Recomputes every cached per-patch energy.
    pub fn refresh(&self, field: &mut NNField) {
        let values: Vec<f64> = (0..field.q.len())
            .into_par_iter()
            .map(|i| self.unary(field.center(i), field.source_xy(field.q[i])))
            .collect();
        field.unary = values;
    }

    /// Term sums recomputed from scratch.
    pub fn terms(&self, field: &NNField) -> EnergyTerms {
        let n = field.n_patches() as f64;
        let parts: Vec<(f64, f64, f64)> = (0..field.q.len())
            .into_par_iter()
            .map(|i| {
                let p = field.center(i);
                let q = field.source_xy(field.q[i]);
                let (ed, es) = self.guide_terms(p, q);
                (self.appearance(p, q, f64::INFINITY), ed, es)
            })
            .collect();
        let mut t = EnergyTerms::default();
        for (a, d, s) in parts {
            t.appearance += a;
            t.distribution += d;
            t.saliency += s;
        }
        t.repetition = field.recount().iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / n;
        t
    }

    pub fn total_energy(&self, field: &NNField) -> f64 {
        self.terms(field).total(&self.weights)
    }

    /// Field with a random valid source centre per target centre, drawn from
    /// source centres with the same guidance label when there are any.
    pub fn random_field(&self, rng: &mut ChaCha8Rng) -> NNField {
        let (tw, th) = (self.target.width, self.target.height);
        let half = self.patch / 2;
        let g = super::energy::guide_scale();
        let mut field = NNField {
            target_dims: (tw, th),
            source_dims: (self.source.width, self.source.height),
            patch: self.patch,
            q: Vec::new(),
            unary: Vec::new(),
            usage: vec![0; self.source.width * self.source.height],
        };
        for y in half..th - half {
            for x in half..tw - half {
                let fg = self.target.data[y * tw + x][3] == g;
                let pool = match (fg, self.valid_fg.is_empty(), self.valid_bg.is_empty()) {
                    (true, false, _) => &self.valid_fg,
                    (false, _, false) => &self.valid_bg,
                    _ => &self.valid,
                };
                let idx = pool[rng.gen_range(0..pool.len())];
                field.q.push(idx);
                field.usage[idx as usize] += 1;
            }
        }
        field.unary = vec![0.0; field.q.len()];
        self.refresh(&mut field);
        field
    }

    /// Field for this (finer) level from a field one level coarser.
    pub fn upsample_field(&self, coarse: &NNField, rng: &mut ChaCha8Rng) -> NNField {
        let (tw, th) = (self.target.width, self.target.height);
        let (sw, sh) = (self.source.width, self.source.height);
        let half = self.patch / 2;
        let (ccw, cch) = coarse.centers_dims();
        let ch = coarse.half();
        let mut field = NNField {
            target_dims: (tw, th),
            source_dims: (sw, sh),
            patch: self.patch,
            q: Vec::new(),
            unary: Vec::new(),
            usage: vec![0; sw * sh],
        };
        for y in half..th - half {
            for x in half..tw - half {
                let cx = (x / 2).clamp(ch, ch + ccw - 1);
                let cy = (y / 2).clamp(ch, ch + cch - 1);
                let (qx, qy) = coarse.source_of((cx, cy));
                let fx = (2 * qx + x).saturating_sub(2 * cx).clamp(half, sw - half - 1);
                let fy = (2 * qy + y).saturating_sub(2 * cy).clamp(half, sh - half - 1);
                let idx = if self.is_valid_center((fx, fy)) {
                    (fy * sw + fx) as u32
                } else {
                    self.valid[rng.gen_range(0..self.valid.len())]
                };
                field.q.push(idx);
                field.usage[idx as usize] += 1;
            }
        }
        field.unary = vec![0.0; field.q.len()];
        self.refresh(&mut field);
        field
    }

    /// Replaces the target colours by the average of the overlapping source
    /// patches, the exact minimiser of the appearance term for a fixed field.
    pub fn vote(&mut self, field: &NNField) {
        let img = vote_planes(field, &self.source);
        for (t, v) in self.target.data.iter_mut().zip(img) {
            t[0] = v[0];
            t[1] = v[1];
            t[2] = v[2];
        }
    }
}

fn vote_planes(field: &NNField, source: &Planes) -> Vec<[f64; 3]> {
    let (tw, th) = field.target_dims;
    let half = field.half() as isize;
    let (cw, ch) = field.centers_dims();
    let sw = source.width;
    let mut out = vec![[0.0; 3]; tw * th];
    out.par_chunks_mut(tw).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            let mut n = 0usize;
            for oy in -half..=half {
                let cy = y as isize - oy;
                if cy < half || cy >= half + ch as isize {
                    continue;
                }
                for ox in -half..=half {
                    let cx = x as isize - ox;
                    if cx < half || cx >= half + cw as isize {
                        continue;
                    }
                    let i = (cy - half) as usize * cw + (cx - half) as usize;
                    let q = field.q[i] as usize;
                    let (qx, qy) = ((q % sw) as isize, (q / sw) as isize);
                    let s = &source.data[((qy + oy) as usize) * sw + (qx + ox) as usize];
                    acc[0] += s[0];
                    acc[1] += s[1];
                    acc[2] += s[2];
                    n += 1;
                }
            }
            let n = n as f64;
            *px = [acc[0] / n, acc[1] / n, acc[2] / n];
        }
    });
    out
}

/// Each output pixel is the uniform average of the source pixels that the
/// field's overlapping patches place on it.
pub fn vote(field: &NNField, source: &RasterImage) -> Result<RasterImage> {
    source.pixels().ensure_dims(field.source_dims)?;
    let planes = Planes::new(source, &BinaryMask::filled(source.width(), source.height(), false));
    let data = vote_planes(field, &planes);
    let (tw, th) = field.target_dims;
    Ok(RasterImage::new(Grid::from_vec(tw, th, data), source.space()))
}

/// Random candidates drawn per search radius.
const SEARCH_SAMPLES: usize = 1;

/// Uniform draw from `[c - r, c + r]` intersected with `[lo, hi]`.
fn window_sample(rng: &mut ChaCha8Rng, c: usize, r: isize, lo: usize, hi: usize) -> usize {
    let a = (c as isize - r).max(lo as isize) as usize;
    let b = ((c as isize + r) as usize).min(hi);
    rng.gen_range(a..=b)
}

/// Randomised nearest-neighbour search: alternating scan-order propagation
/// and exponentially shrinking random search.
///
/// A move is accepted only when it lowers both the patch's own energy and the
/// total objective, given the usage histogram at that instant; the histogram
/// is updated with each accepted move.
pub fn pm_match(field: &mut NNField, syn: &Synthesis, iters: usize, rng: &mut ChaCha8Rng) {
    let n = field.n_patches() as f64;
    let l2 = syn.weights.repetition;
    let (cw, ch) = field.centers_dims();
    let half = field.half();
    let (sw, sh) = field.source_dims;
    let max_radius = sw.max(sh) as isize;

    let try_move = |field: &mut NNField, i: usize, q: (usize, usize)| {
        if !syn.is_valid_center(q) {
            return;
        }
        let new = (q.1 * sw + q.0) as u32;
        let cur = field.q[i];
        if new == cur {
            return;
        }
        let phi_c = field.usage[cur as usize] as f64;
        let phi_n = field.usage[new as usize] as f64;
        let pen = l2 * (phi_n + 1.0 - phi_c) / n;
        let budget = field.unary[i] - pen.max(2.0 * pen);
        if budget <= 0.0 {
            return;
        }
        let u = syn.unary_within(field.center(i), q, budget);
        if u < budget {
            debug_assert!(u + pen < field.unary[i]);
            field.usage[cur as usize] -= 1;
            field.usage[new as usize] += 1;
            field.q[i] = new;
            field.unary[i] = u;
        }
    };

    for it in 0..iters {
        let forward = it % 2 == 0;
        let step: isize = if forward { 1 } else { -1 };
        for k in 0..cw * ch {
            let i = if forward { k } else { cw * ch - 1 - k };
            let (cx, cy) = (i % cw, i / cw);
            // Propagation from the already visited neighbours.
            let neighbours = [(cx as isize - step, cy as isize), (cx as isize, cy as isize - step)];
            for (nx, ny) in neighbours {
                if nx < 0 || ny < 0 || nx >= cw as isize || ny >= ch as isize {
                    continue;
                }
                let j = ny as usize * cw + nx as usize;
                let (qx, qy) = field.source_xy(field.q[j]);
                let qx = qx as isize + (cx as isize - nx);
                let qy = qy as isize + (cy as isize - ny);
                if qx < half as isize || qy < half as isize || qx >= (sw - half) as isize || qy >= (sh - half) as isize {
                    continue;
                }
                try_move(field, i, (qx as usize, qy as usize));
            }
            // Random search around the current match.
            let mut r = max_radius;
            while r >= 1 {
                for _ in 0..SEARCH_SAMPLES {
                    let (qx, qy) = field.source_xy(field.q[i]);
                    let rx = window_sample(rng, qx, r, half, sw - half - 1);
                    let ry = window_sample(rng, qy, r, half, sh - half - 1);
                    try_move(field, i, (rx, ry));
                }
                r /= 2;
            }
        }
    }
}

/// Per-pixel mean squared colour difference between the patch around each
/// pixel of `target` and its approximate nearest patch in `source`. Border
/// pixels take the value of the nearest patch centre.
pub fn nearest_patch_cost(
    target: &RasterImage,
    source: &RasterImage,
    patch: usize,
    iters: usize,
    seed: u64,
) -> Result<ScalarField> {
    let weights = Weights {
        distribution: 0.0,
        repetition: 0.0,
        saliency: 0.0,
    };
    let syn = Synthesis::new(target, source, None, weights, patch, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = syn.random_field(&mut rng);
    pm_match(&mut field, &syn, iters, &mut rng);
    let (cw, ch) = field.centers_dims();
    let half = patch / 2;
    Ok(Grid::from_fn(target.width(), target.height(), |x, y| {
        let cx = x.clamp(half, half + cw - 1);
        let cy = y.clamp(half, half + ch - 1);
        field.cached_unary((cx, cy))
    }))
}
