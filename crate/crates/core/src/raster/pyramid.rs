use super::grid::{BinaryMask, Grid, ScalarField};
use super::image::RasterImage;
use super::resample::Blend;
use crate::error::{Error, Result};

/// Smallest side allowed at the top of a pyramid.
pub const MIN_LEVEL_SIDE: usize = 8;

/// Raster kinds with a factor-2 box-average reduction.
pub trait Downsample: Sized {
    fn dims(&self) -> (usize, usize);
    fn half(&self) -> Self;
}

fn half_grid<V: Blend>(grid: &Grid<V>) -> Grid<V> {
    let (w, h) = grid.dims();
    let nw = w.div_ceil(2);
    let nh = h.div_ceil(2);
    Grid::from_fn(nw, nh, |x, y| {
        let mut acc = V::zero();
        let mut n = 0usize;
        for yy in 2 * y..(2 * y + 2).min(h) {
            for xx in 2 * x..(2 * x + 2).min(w) {
                acc = acc.add_scaled(*grid.get(xx, yy), 1.0);
                n += 1;
            }
        }
        V::zero().add_scaled(acc, 1.0 / n as f64)
    })
}

impl Downsample for ScalarField {
    fn dims(&self) -> (usize, usize) {
        Grid::dims(self)
    }
    fn half(&self) -> Self {
        half_grid(self)
    }
}

impl Downsample for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        Grid::dims(self)
    }
    /// Box average followed by re-binarization at 0.5.
    fn half(&self) -> Self {
        half_grid(&self.to_field()).map(|&v| v >= 0.5)
    }
}

impl Downsample for RasterImage {
    fn dims(&self) -> (usize, usize) {
        RasterImage::dims(self)
    }
    fn half(&self) -> Self {
        RasterImage::new(half_grid(self.pixels()), self.space())
    }
}

/// Multi-resolution stack; level 0 is the input resolution.
#[derive(Clone, Debug)]
pub struct Pyramid<T> {
    levels: Vec<T>,
}

impl<T> Pyramid<T> {
    pub fn level(&self, l: usize) -> &T {
        &self.levels[l]
    }

    /// Index of the coarsest level.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<T> {
        self.levels
    }
}

/// Dimensions of each level for `top + 1` levels of ⌈/2⌉ reduction.
pub fn pyramid_dims(width: usize, height: usize, top: usize) -> Vec<(usize, usize)> {
    let mut dims = vec![(width, height)];
    for _ in 0..top {
        let (w, h) = *dims.last().unwrap();
        dims.push((w.div_ceil(2), h.div_ceil(2)));
    }
    dims
}

/// Builds levels `0..=top` by successive factor-2 box reduction.
pub fn build_pyramid<T: Downsample + Clone>(base: &T, top: usize) -> Result<Pyramid<T>> {
    let (w, h) = base.dims();
    let (tw, th) = *pyramid_dims(w, h, top).last().unwrap();
    if top > 0 && (tw < MIN_LEVEL_SIDE || th < MIN_LEVEL_SIDE) {
        return Err(Error::TooManyLevels {
            levels: top,
            width: w,
            height: h,
        });
    }
    let mut levels = Vec::with_capacity(top + 1);
    levels.push(base.clone());
    for _ in 0..top {
        let next = levels.last().unwrap().half();
        levels.push(next);
    }
    Ok(Pyramid { levels })
}
