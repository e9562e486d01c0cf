//! Exact Euclidean distance transforms.

use rayon::prelude::*;

use super::grid::{BinaryMask, Grid, ScalarField};
use crate::error::Result;

const INF: i64 = i64::MAX / 4;

/// Euclidean distance from every pixel to the nearest pixel of the opposite
/// value. Pixels adjacent to the boundary get the minimum value 1.
pub fn distance_transform(mask: &BinaryMask) -> Result<ScalarField> {
    mask.ensure_non_uniform()?;
    let to_background = squared_edt(mask, false);
    let to_foreground = squared_edt(mask, true);
    Ok(Grid::from_fn(mask.width(), mask.height(), |x, y| {
        let d2 = if *mask.get(x, y) {
            *to_background.get(x, y)
        } else {
            *to_foreground.get(x, y)
        };
        (d2 as f64).sqrt()
    }))
}

/// Positive inside the foreground, negative outside, magnitude as in
/// [`distance_transform`].
pub fn signed_distance(mask: &BinaryMask) -> Result<ScalarField> {
    let d = distance_transform(mask)?;
    Ok(Grid::from_fn(mask.width(), mask.height(), |x, y| {
        if *mask.get(x, y) {
            *d.get(x, y)
        } else {
            -*d.get(x, y)
        }
    }))
}

/// Squared distance to the nearest pixel whose value equals `site`.
fn squared_edt(mask: &BinaryMask, site: bool) -> Grid<i64> {
    let (w, h) = mask.dims();
    // Column pass.
    let mut cols = vec![0i64; w * h];
    cols.par_chunks_mut(h).enumerate().for_each(|(x, col)| {
        let f: Vec<i64> = (0..h)
            .map(|y| if *mask.get(x, y) == site { 0 } else { INF })
            .collect();
        lower_envelope(&f, col);
    });
    // Row pass over the transposed column results.
    let mut out = vec![0i64; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let f: Vec<i64> = (0..w).map(|x| cols[x * h + y]).collect();
        lower_envelope(&f, row);
    });
    Grid::from_vec(w, h, out)
}

/// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
fn lower_envelope(f: &[i64], out: &mut [i64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    let first = match f.iter().position(|&val| val < INF) {
        Some(i) => i,
        None => {
            out.iter_mut().for_each(|o| *o = INF);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64
                / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as i64 - p as i64;
        *o = f[p] + d * d;
    }
}
