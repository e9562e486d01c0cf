//! SLIC superpixels: local k-means in (Lab, xy) followed by connectivity
//! enforcement.

use crate::error::{Error, Result};
use crate::raster::{decode_lab, Grid, RasterImage};

/// Compactness `m` weighting spatial against colour distance.
pub const COMPACTNESS: f64 = 10.0;
const ITERATIONS: usize = 10;

/// Superpixel partition of an image.
#[derive(Clone, Debug)]
pub struct SuperpixelMap {
    /// Label in `0..count` for every pixel.
    pub labels: Grid<u32>,
    pub count: usize,
    /// Mean CIELab colour (L in [0,100]) of each superpixel's members.
    pub features: Vec<[f64; 3]>,
    pub sizes: Vec<usize>,
}

pub fn superpixels(smoothed: &RasterImage, cell: usize) -> Result<SuperpixelMap> {
    if cell < 4 {
        return Err(Error::InvalidConfig(format!(
            "superpixel cell must be >= 4, got {cell}"
        )));
    }
    let lab_img = smoothed.to_lab();
    let lab: Grid<[f64; 3]> = lab_img.pixels().map(|&p| decode_lab(p));
    let (w, h) = lab.dims();
    let step = cell as f64;

    let nx = ((w as f64 / step).round() as usize).max(1);
    let ny = ((h as f64 / step).round() as usize).max(1);
    let sx = w as f64 / nx as f64;
    let sy = h as f64 / ny as f64;
    // (L, a, b, x, y)
    let mut centers: Vec<[f64; 5]> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = ((i as f64 + 0.5) * sx) as usize;
            let cy = ((j as f64 + 0.5) * sy) as usize;
            let (px, py) = lowest_gradient(&lab, cx.min(w - 1), cy.min(h - 1));
            let c = lab.get(px, py);
            centers.push([c[0], c[1], c[2], px as f64, py as f64]);
        }
    }

    let spatial = (COMPACTNESS / step).powi(2);
    let mut labels = Grid::filled(w, h, u32::MAX);
    let mut dist = Grid::filled(w, h, f64::INFINITY);
    let reach = (2.0 * step).ceil() as isize;
    for _ in 0..ITERATIONS {
        dist.as_mut_slice().fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x0 = (c[3] as isize - reach).max(0) as usize;
            let x1 = ((c[3] as isize + reach) as usize).min(w - 1);
            let y0 = (c[4] as isize - reach).max(0) as usize;
            let y1 = ((c[4] as isize + reach) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = lab.get(x, y);
                    let dc = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
                    let ds = (x as f64 - c[3]).powi(2) + (y as f64 - c[4]).powi(2);
                    let d = dc + ds * spatial;
                    if d < *dist.get(x, y) {
                        dist.set(x, y, d);
                        labels.set(x, y, k as u32);
                    }
                }
            }
        }
        let mut acc = vec![[0.0f64; 6]; centers.len()];
        for y in 0..h {
            for x in 0..w {
                let k = *labels.get(x, y);
                if k == u32::MAX {
                    continue;
                }
                let p = lab.get(x, y);
                let a = &mut acc[k as usize];
                a[0] += p[0];
                a[1] += p[1];
                a[2] += p[2];
                a[3] += x as f64;
                a[4] += y as f64;
                a[5] += 1.0;
            }
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[5] > 0.0 {
                for d in 0..5 {
                    c[d] = a[d] / a[5];
                }
            }
        }
    }
    // Pixels never reached by any window (only possible on tiny images).
    for y in 0..h {
        for x in 0..w {
            if *labels.get(x, y) == u32::MAX {
                let k = centers
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        let da = (a.1[3] - x as f64).powi(2) + (a.1[4] - y as f64).powi(2);
                        let db = (b.1[3] - x as f64).powi(2) + (b.1[4] - y as f64).powi(2);
                        da.total_cmp(&db)
                    })
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                labels.set(x, y, k as u32);
            }
        }
    }

    let min_size = (cell * cell / 4).max(1);
    let (labels, count) = enforce_connectivity(&labels, min_size);
    let mut sums = vec![[0.0f64; 3]; count];
    let mut sizes = vec![0usize; count];
    for y in 0..h {
        for x in 0..w {
            let k = *labels.get(x, y) as usize;
            let p = lab.get(x, y);
            for c in 0..3 {
                sums[k][c] += p[c];
            }
            sizes[k] += 1;
        }
    }
    let features = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64])
        .collect();
    Ok(SuperpixelMap {
        labels,
        count,
        features,
        sizes,
    })
}

fn lowest_gradient(lab: &Grid<[f64; 3]>, cx: usize, cy: usize) -> (usize, usize) {
    let (w, h) = lab.dims();
    let grad = |x: usize, y: usize| -> f64 {
        let l = lab.get_clamped(x as isize - 1, y as isize);
        let r = lab.get_clamped(x as isize + 1, y as isize);
        let u = lab.get_clamped(x as isize, y as isize - 1);
        let d = lab.get_clamped(x as isize, y as isize + 1);
        (0..3)
            .map(|c| (r[c] - l[c]).powi(2) + (d[c] - u[c]).powi(2))
            .sum()
    };
    let mut best = (cx, cy);
    let mut best_g = grad(cx, cy);
    for y in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
        for x in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
            let g = grad(x, y);
            if g < best_g {
                best_g = g;
                best = (x, y);
            }
        }
    }
    best
}

/// Relabels 4-connected regions; regions smaller than `min_size` are absorbed
/// into an adjacent, already relabelled region.
fn enforce_connectivity(labels: &Grid<u32>, min_size: usize) -> (Grid<u32>, usize) {
    let (w, h) = labels.dims();
    let mut out = Grid::filled(w, h, u32::MAX);
    let mut count = 0u32;
    let mut region = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *out.get(x, y) != u32::MAX {
                continue;
            }
            let original = *labels.get(x, y);
            let mut adjacent = None;
            for (dx, dy) in [(-1isize, 0isize), (0, -1), (1, 0), (0, 1)] {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let v = *out.get(nx as usize, ny as usize);
                    if v != u32::MAX {
                        adjacent = Some(v);
                        break;
                    }
                }
            }
            region.clear();
            out.set(x, y, count);
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                region.push((cx, cy));
                for (dx, dy) in [(-1isize, 0isize), (0, -1), (1, 0), (0, 1)] {
                    let nx = cx as isize + dx;
                    let ny = cy as isize + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if *out.get(nx, ny) == u32::MAX && *labels.get(nx, ny) == original {
                        out.set(nx, ny, count);
                        stack.push((nx, ny));
                    }
                }
            }
            match adjacent {
                Some(adj) if region.len() < min_size => {
                    for &(rx, ry) in &region {
                        out.set(rx, ry, adj);
                    }
                }
                _ => count += 1,
            }
        }
    }
    (out, count as usize)
}
