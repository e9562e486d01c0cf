use super::grid::{binarize, BinaryMask, Grid, ScalarField};
use super::image::RasterImage;
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ResampleMethod {
    Bicubic,
    Nearest,
}

/// Values that can be linearly combined during interpolation.
pub trait Blend: Copy {
    fn zero() -> Self;
    fn add_scaled(self, other: Self, weight: f64) -> Self;
}

impl Blend for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn add_scaled(self, other: Self, weight: f64) -> Self {
        self + other * weight
    }
}

impl Blend for [f64; 3] {
    #[inline]
    fn zero() -> Self {
        [0.0; 3]
    }
    #[inline]
    fn add_scaled(self, other: Self, weight: f64) -> Self {
        [
            self[0] + other[0] * weight,
            self[1] + other[1] * weight,
            self[2] + other[2] * weight,
        ]
    }
}

/// Raster kinds that can be resized.
pub trait Resample: Sized {
    fn dims(&self) -> (usize, usize);
    fn resize(&self, width: usize, height: usize, method: ResampleMethod) -> Result<Self>;
}

/// Scales both dimensions by `factor` (rounded to the nearest pixel).
pub fn resample<R: Resample>(input: &R, factor: f64, method: ResampleMethod) -> Result<R> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "resample factor must be positive, got {factor}"
        )));
    }
    let (w, h) = input.dims();
    let nw = (w as f64 * factor).round() as usize;
    let nh = (h as f64 * factor).round() as usize;
    input.resize(nw, nh, method)
}

#[inline]
fn cubic(t: f64) -> f64 {
    // Keys kernel, a = -0.5
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-index source taps `(index, weight)`, antialiased when shrinking.
fn taps(input: usize, output: usize, method: ResampleMethod) -> Vec<Vec<(usize, f64)>> {
    let scale = output as f64 / input as f64;
    (0..output)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            match method {
                ResampleMethod::Nearest => {
                    let src = (((i as f64 + 0.5) / scale).floor() as usize).min(input - 1);
                    vec![(src, 1.0)]
                }
                ResampleMethod::Bicubic => {
                    let stretch = (1.0 / scale).max(1.0);
                    let support = 2.0 * stretch;
                    let lo = (center - support).floor() as isize;
                    let hi = (center + support).ceil() as isize;
                    let mut acc: Vec<(usize, f64)> = Vec::new();
                    let mut total = 0.0;
                    for s in lo..=hi {
                        let w = cubic((s as f64 - center) / stretch);
                        if w == 0.0 {
                            continue;
                        }
                        let idx = s.clamp(0, input as isize - 1) as usize;
                        total += w;
                        match acc.iter_mut().find(|(j, _)| *j == idx) {
                            Some(entry) => entry.1 += w,
                            None => acc.push((idx, w)),
                        }
                    }
                    acc.iter_mut().for_each(|(_, w)| *w /= total);
                    acc
                }
            }
        })
        .collect()
}

fn resize_grid<V: Blend>(
    grid: &Grid<V>,
    width: usize,
    height: usize,
    method: ResampleMethod,
) -> Result<Grid<V>> {
    if width < 1 || height < 1 {
        return Err(Error::DegenerateOutput { width, height });
    }
    let (w, h) = grid.dims();
    if (w, h) == (width, height) {
        return Ok(grid.clone());
    }
    let xt = taps(w, width, method);
    let yt = taps(h, height, method);
    let horizontal = Grid::from_fn(width, h, |x, y| {
        xt[x]
            .iter()
            .fold(V::zero(), |acc, &(sx, wt)| acc.add_scaled(*grid.get(sx, y), wt))
    });
    Ok(Grid::from_fn(width, height, |x, y| {
        yt[y]
            .iter()
            .fold(V::zero(), |acc, &(sy, wt)| acc.add_scaled(*horizontal.get(x, sy), wt))
    }))
}

impl Resample for ScalarField {
    fn dims(&self) -> (usize, usize) {
        Grid::dims(self)
    }

    fn resize(&self, width: usize, height: usize, method: ResampleMethod) -> Result<Self> {
        resize_grid(self, width, height, method)
    }
}

impl Resample for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        Grid::dims(self)
    }

    /// Bicubic results are re-binarized at 0.5.
    fn resize(&self, width: usize, height: usize, method: ResampleMethod) -> Result<Self> {
        match method {
            ResampleMethod::Nearest => {
                if width < 1 || height < 1 {
                    return Err(Error::DegenerateOutput { width, height });
                }
                let xt = taps(self.width(), width, method);
                let yt = taps(self.height(), height, method);
                Ok(Grid::from_fn(width, height, |x, y| {
                    *self.get(xt[x][0].0, yt[y][0].0)
                }))
            }
            ResampleMethod::Bicubic => Ok(binarize(
                &resize_grid(&self.to_field(), width, height, method)?,
                0.5,
            )),
        }
    }
}

impl Resample for RasterImage {
    fn dims(&self) -> (usize, usize) {
        RasterImage::dims(self)
    }

    fn resize(&self, width: usize, height: usize, method: ResampleMethod) -> Result<Self> {
        let mut px = resize_grid(self.pixels(), width, height, method)?;
        // cubic overshoot
        px.as_mut_slice()
            .iter_mut()
            .for_each(|p| p.iter_mut().for_each(|c| *c = c.clamp(0.0, 1.0)));
        Ok(RasterImage::new(px, self.space()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ColorSpace;

    #[test]
    fn unit_factor_is_identity() {
        let f = ScalarField::from_fn(7, 5, |x, y| (x * 3 + y) as f64 * 0.01);
        assert_eq!(resample(&f, 1.0, ResampleMethod::Bicubic).unwrap(), f);
        let m = BinaryMask::from_fn(7, 5, |x, y| (x + y) % 3 == 0);
        assert_eq!(resample(&m, 1.0, ResampleMethod::Nearest).unwrap(), m);
    }

    #[test]
    fn constants_are_preserved() {
        let img = RasterImage::filled(9, 6, [0.2, 0.4, 0.6], ColorSpace::Srgb);
        for factor in [0.3, 0.5, 1.7, 2.0, 3.3] {
            let out = resample(&img, factor, ResampleMethod::Bicubic).unwrap();
            for p in out.pixels().as_slice() {
                for (c, want) in p.iter().zip([0.2, 0.4, 0.6]) {
                    assert!((c - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ramp_round_trip() {
        let f = ScalarField::from_fn(40, 30, |x, y| (x as f64 + 0.5 * y as f64) / 60.0);
        let up = resample(&f, 2.0, ResampleMethod::Bicubic).unwrap();
        let down = resample(&up, 0.5, ResampleMethod::Bicubic).unwrap();
        assert_eq!(down.dims(), f.dims());
        let max_err = f
            .as_slice()
            .iter()
            .zip(down.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.02, "max error {max_err}");
    }

    #[test]
    fn degenerate_output_rejected() {
        let f = ScalarField::filled(3, 3, 1.0);
        assert!(matches!(
            resample(&f, 0.1, ResampleMethod::Nearest),
            Err(Error::DegenerateOutput { .. })
        ));
    }

    #[test]
    fn mask_upsample_stays_binary_and_shaped() {
        let m = BinaryMask::from_fn(10, 10, |x, _| x < 5);
        let up = resample(&m, 2.0, ResampleMethod::Bicubic).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(*up.get(x, y), x < 10);
            }
        }
    }
}
