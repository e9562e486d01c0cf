//! Boundary-patch shape synthesis.
//!
//! Contours are traced into chains of boundary pixels. Each boundary pixel
//! carries a binary patch sampled in a frame aligned with its outward normal
//! (quantised to [`NORMAL_BINS`] directions). A target pixel is matched to the
//! reference pixel whose chain neighbourhood agrees best over a window along
//! both chains, so that consecutive target pixels pick up consecutive stretches
//! of the reference contour. Matched patches are rotated back into the target
//! frame and averaged.

use rayon::prelude::*;

use crate::error::Result;
use crate::raster::{binarize, gaussian_blur, BinaryMask, Grid, ScalarField};

pub const NORMAL_BINS: usize = 16;
const NORMAL_SIGMA: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LssParams {
    /// Odd patch side.
    pub patch: usize,
    pub iterations: usize,
    /// Cost of breaking a run of consecutive reference contour pixels, in
    /// units of squared patch difference.
    pub jump_cost: f64,
}

impl LssParams {
    pub fn new(patch: usize, iterations: usize) -> Self {
        LssParams {
            patch,
            iterations,
            jump_cost: 0.5 * (patch * patch) as f64,
        }
    }
}

struct Contour {
    points: Vec<(usize, usize)>,
    bins: Vec<usize>,
    /// Start offset and length of the chain each point belongs to.
    chain: Vec<(usize, usize)>,
    /// Whether walking the chain forward moves along +tangent.
    forward: Vec<bool>,
    /// Whether the chain's two ends touch.
    closed: Vec<bool>,
}

fn frame(bin: usize) -> ([f64; 2], [f64; 2]) {
    let a = bin as f64 * std::f64::consts::TAU / NORMAL_BINS as f64;
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let (s, c) = (snap(a.sin()), snap(a.cos()));
    // (tangent, normal)
    ([-s, c], [c, s])
}

fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    Grid::from_fn(w, h, |x, y| {
        *mask.get(x, y)
            && ((x > 0 && !*mask.get(x - 1, y))
                || (x + 1 < w && !*mask.get(x + 1, y))
                || (y > 0 && !*mask.get(x, y - 1))
                || (y + 1 < h && !*mask.get(x, y + 1)))
    })
}

const WALK: [(isize, isize); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)];

fn trace(mask: &BinaryMask) -> Contour {
    let (w, h) = mask.dims();
    let edge = boundary(mask);
    let smooth = gaussian_blur(&mask.to_field(), NORMAL_SIGMA);
    let angle = |x: usize, y: usize| -> f64 {
        let gx = smooth.get_clamped(x as isize + 1, y as isize) - smooth.get_clamped(x as isize - 1, y as isize);
        let gy = smooth.get_clamped(x as isize, y as isize + 1) - smooth.get_clamped(x as isize, y as isize - 1);
        if gx == 0.0 && gy == 0.0 {
            0.0
        } else {
            (-gy).atan2(-gx)
        }
    };
    let mut visited = BinaryMask::filled(w, h, false);
    let step = |visited: &BinaryMask, (x, y): (usize, usize)| -> Option<(usize, usize)> {
        WALK.iter().find_map(|&(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                return None;
            }
            let p = (nx as usize, ny as usize);
            (*edge.get(p.0, p.1) && !*visited.get(p.0, p.1)).then_some(p)
        })
    };
    let mut c = Contour {
        points: Vec::new(),
        bins: Vec::new(),
        chain: Vec::new(),
        forward: Vec::new(),
        closed: Vec::new(),
    };
    for y in 0..h {
        for x in 0..w {
            if !*edge.get(x, y) || *visited.get(x, y) {
                continue;
            }
            visited.set(x, y, true);
            let mut ahead = vec![(x, y)];
            while let Some(p) = step(&visited, *ahead.last().unwrap()) {
                visited.set(p.0, p.1, true);
                ahead.push(p);
            }
            let mut behind = Vec::new();
            let mut cur = (x, y);
            while let Some(p) = step(&visited, cur) {
                visited.set(p.0, p.1, true);
                behind.push(p);
                cur = p;
            }
            behind.reverse();
            behind.extend(ahead);
            let chain = behind;
            let start = c.points.len();
            let mut along = 0.0;
            let mut angles = Vec::with_capacity(chain.len());
            for (i, &(px, py)) in chain.iter().enumerate() {
                let a = angle(px, py);
                angles.push(a);
                if let Some(&(nx, ny)) = chain.get(i + 1) {
                    along += (nx as f64 - px as f64) * -a.sin() + (ny as f64 - py as f64) * a.cos();
                }
            }
            let (f, l) = (chain[0], chain[chain.len() - 1]);
            let closed = chain.len() > 2 && f.0.abs_diff(l.0) <= 1 && f.1.abs_diff(l.1) <= 1;
            for (&p, &a) in chain.iter().zip(&angles) {
                let bin = (a / std::f64::consts::TAU * NORMAL_BINS as f64).round() as isize;
                c.points.push(p);
                c.bins.push(bin.rem_euclid(NORMAL_BINS as isize) as usize);
                c.chain.push((start, chain.len()));
                c.forward.push(along >= 0.0);
                c.closed.push(closed);
            }
        }
    }
    c
}

fn canonical_patches(field: &ScalarField, c: &Contour, patch: usize) -> Vec<f32> {
    let h = (patch / 2) as isize;
    let n = patch * patch;
    let mut out = vec![0.0f32; c.points.len() * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
        let (px, py) = c.points[i];
        let (t, nn) = frame(c.bins[i]);
        let mut k = 0;
        for cy in -h..=h {
            for cx in -h..=h {
                let x = px as f64 + cx as f64 * t[0] + cy as f64 * nn[0];
                let y = py as f64 + cx as f64 * t[1] + cy as f64 * nn[1];
                dst[k] = field.sample_bilinear(x, y) as f32;
                k += 1;
            }
        }
    });
    out
}

/// Continuous vote field of shape synthesis. Target contour pixels outside
/// `active` keep their own patch, which leaves them unchanged.
pub fn lss_field(
    target: &BinaryMask,
    reference: &BinaryMask,
    params: &LssParams,
    active: Option<&BinaryMask>,
) -> Result<ScalarField> {
    target.ensure_non_uniform()?;
    reference.ensure_non_uniform()?;
    let mut current = target.clone();
    let mut field = target.to_field();
    let rc = trace(reference);
    let rfield = reference.to_field();
    let rpatches = canonical_patches(&rfield, &rc, params.patch);
    let mut ref_index = Grid::filled(reference.width(), reference.height(), u32::MAX);
    for (j, &(x, y)) in rc.points.iter().enumerate() {
        ref_index.set(x, y, j as u32);
    }
    for _ in 0..params.iterations {
        field = synthesize(&current, reference, &rfield, &rc, &rpatches, &ref_index, params, active);
        let next = binarize(&field, 0.5);
        if next == current || next.uniform_value().is_some() {
            break;
        }
        current = next;
    }
    Ok(field)
}

pub fn lss(
    target: &BinaryMask,
    reference: &BinaryMask,
    params: &LssParams,
) -> Result<BinaryMask> {
    Ok(binarize(&lss_field(target, reference, params, None)?, 0.5))
}

#[allow(clippy::too_many_arguments)]
fn synthesize(
    target: &BinaryMask,
    reference: &BinaryMask,
    rfield: &ScalarField,
    rc: &Contour,
    rpatches: &[f32],
    ref_index: &Grid<u32>,
    params: &LssParams,
    active: Option<&BinaryMask>,
) -> ScalarField {
    let (w, h) = target.dims();
    let tfield = target.to_field();
    let tc = trace(target);
    let n = params.patch * params.patch;
    let tpatches = canonical_patches(&tfield, &tc, params.patch);
    let nt = tc.points.len();
    let nr = rc.points.len();
    let is_active = |i: usize| active.is_none_or(|a| *a.get(tc.points[i].0, tc.points[i].1));
    let distances = |i: usize| -> Vec<f32> {
        let a = &tpatches[i * n..(i + 1) * n];
        (0..nr)
            .map(|j| {
                let b = &rpatches[j * n..(j + 1) * n];
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
            })
            .collect()
    };
    // Maximal runs of active points along each target chain.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < nt {
        if !is_active(i) {
            i += 1;
            continue;
        }
        let (s, len) = tc.chain[i];
        let mut e = i;
        while e + 1 < s + len && is_active(e + 1) {
            e += 1;
        }
        runs.push((i, e + 1));
        i = e + 1;
    }
    let same_position = |i: usize| -> Option<usize> {
        let (px, py) = tc.points[i];
        (px < reference.width() && py < reference.height())
            .then(|| *ref_index.get(px, py))
            .filter(|&j| j != u32::MAX)
            .map(|j| j as usize)
    };
    let jump = params.jump_cost as f32;
    let assigned: Vec<Vec<(usize, usize, usize)>> = runs
        .par_iter()
        .map(|&(a, b)| {
            let forward = tc.forward[a];
            let pred = |j: usize| -> Option<usize> {
                let (rs, rl) = rc.chain[j];
                let dir: isize = if rc.forward[j] == forward { 1 } else { -1 };
                let p = (j - rs) as isize - dir;
                if p >= 0 && (p as usize) < rl {
                    Some(rs + p as usize)
                } else if rc.closed[j] {
                    Some(rs + p.rem_euclid(rl as isize) as usize)
                } else {
                    None
                }
            };
            let mut cost = distances(a);
            let mut advanced: Vec<Vec<bool>> = Vec::with_capacity(b - a);
            let mut jump_from: Vec<usize> = Vec::with_capacity(b - a);
            advanced.push(vec![false; nr]);
            jump_from.push(0);
            for i in a + 1..b {
                let d = distances(i);
                let (best_prev, best_cost) = argmin(&cost);
                let mut next = vec![0.0f32; nr];
                let mut adv = vec![false; nr];
                for j in 0..nr {
                    let via_jump = best_cost + jump;
                    match pred(j) {
                        Some(p) if cost[p] <= via_jump => {
                            next[j] = cost[p] + d[j];
                            adv[j] = true;
                        }
                        _ => next[j] = via_jump + d[j],
                    }
                }
                cost = next;
                advanced.push(adv);
                jump_from.push(best_prev);
            }
            let (mut j, best) = argmin(&cost);
            if let Some(sp) = same_position(b - 1) {
                if cost[sp] <= best {
                    j = sp;
                }
            }
            // (target, reference, segment); segments break where the path jumps.
            let mut out = vec![(0, 0, 0); b - a];
            let mut jumps = vec![false; b - a];
            for t in (0..b - a).rev() {
                out[t].0 = a + t;
                out[t].1 = j;
                if t > 0 {
                    jumps[t] = !advanced[t][j];
                    j = if advanced[t][j] {
                        pred(j).expect("advanced from a predecessor")
                    } else {
                        jump_from[t]
                    };
                }
            }
            let mut seg = a;
            for t in 0..b - a {
                if jumps[t] {
                    seg = a + t;
                }
                out[t].2 = seg;
            }
            out
        })
        .collect();

    let reach = params.patch as isize;
    let half = (params.patch / 2) as isize;
    let mut acc = ScalarField::filled(w, h, 0.0);
    let mut weight = ScalarField::filled(w, h, 0.0);
    for run in &assigned {
        for (t, &(i, j, seg)) in run.iter().enumerate() {
            let lo = (t as isize - reach).max(0) as usize;
            let hi = (t + reach as usize + 1).min(run.len());
            let window: Vec<((usize, usize), (usize, usize))> = run[lo..hi]
                .iter()
                .filter(|e| e.2 == seg)
                .map(|e| (rc.points[e.1], tc.points[e.0]))
                .collect();
            let fit = RigidFit::new(&window, frame_angle(tc.bins[i]) - frame_angle(rc.bins[j]));
            let (qx, qy) = rc.points[j];
            let (cx, cy) = fit.apply(qx as f64, qy as f64);
            let (cx, cy) = (cx.round() as isize, cy.round() as isize);
            for oy in -half..=half {
                for ox in -half..=half {
                    let x = cx + ox;
                    let y = cy + oy;
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    let v = match fit.integer_shift() {
                        Some((dx, dy)) => *rfield.get_clamped(x - dx, y - dy),
                        None => {
                            let (sx, sy) = fit.invert(x as f64, y as f64);
                            rfield.sample_bilinear(sx, sy)
                        }
                    };
                    *acc.get_mut(x as usize, y as usize) += v;
                    *weight.get_mut(x as usize, y as usize) += 1.0;
                }
            }
        }
    }
    Grid::from_fn(w, h, |x, y| {
        let wt = *weight.get(x, y);
        if wt > 0.0 {
            acc.get(x, y) / wt
        } else {
            *tfield.get(x, y)
        }
    })
}

fn frame_angle(bin: usize) -> f64 {
    bin as f64 * std::f64::consts::TAU / NORMAL_BINS as f64
}

/// Rotation plus translation taking reference points onto target points.
struct RigidFit {
    cos: f64,
    sin: f64,
    from: (f64, f64),
    to: (f64, f64),
}

impl RigidFit {
    /// Least-squares fit over `(reference, target)` pairs. With fewer than
    /// three pairs the rotation falls back to `angle`.
    fn new(pairs: &[((usize, usize), (usize, usize))], angle: f64) -> Self {
        let n = pairs.len() as f64;
        let mean = |sel: fn(&((usize, usize), (usize, usize))) -> (usize, usize)| {
            let (sx, sy) = pairs.iter().map(sel).fold((0.0, 0.0), |a, p| (a.0 + p.0 as f64, a.1 + p.1 as f64));
            (sx / n, sy / n)
        };
        let from = mean(|p| p.0);
        let to = mean(|p| p.1);
        let theta = if pairs.len() >= 3 {
            let (mut dot, mut cross) = (0.0, 0.0);
            for &((ax, ay), (bx, by)) in pairs {
                let (ax, ay) = (ax as f64 - from.0, ay as f64 - from.1);
                let (bx, by) = (bx as f64 - to.0, by as f64 - to.1);
                dot += ax * bx + ay * by;
                cross += ax * by - ay * bx;
            }
            cross.atan2(dot)
        } else {
            angle
        };
        let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
        RigidFit {
            cos: snap(theta.cos()),
            sin: snap(theta.sin()),
            from,
            to,
        }
    }

    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.from.0, y - self.from.1);
        (
            self.to.0 + self.cos * dx - self.sin * dy,
            self.to.1 + self.sin * dx + self.cos * dy,
        )
    }

    fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.to.0, y - self.to.1);
        (
            self.from.0 + self.cos * dx + self.sin * dy,
            self.from.1 - self.sin * dx + self.cos * dy,
        )
    }

    /// The translation when the fit is an exact integer shift.
    fn integer_shift(&self) -> Option<(isize, isize)> {
        let tx = self.to.0 - self.from.0;
        let ty = self.to.1 - self.from.1;
        (self.cos == 1.0 && self.sin == 0.0 && tx.fract() == 0.0 && ty.fract() == 0.0)
            .then_some((tx as isize, ty as isize))
    }
}

/// Smallest value and its first index.
fn argmin(v: &[f32]) -> (usize, f32) {
    v.iter()
        .enumerate()
        .fold((0, f32::INFINITY), |acc, (j, &c)| if c < acc.1 { (j, c) } else { acc })
}
