//! Raster containers and the low-level image operations shared by every stage.

mod distance;
mod grid;
mod image;
mod integral;
pub mod io;
mod pyramid;
mod resample;

pub use self::distance::{distance_transform, signed_distance};
pub use self::grid::{binarize, BinaryMask, Grid, ScalarField};
pub use self::image::{decode_lab, encode_lab, lab_to_srgb, srgb_to_lab, ColorSpace, RasterImage};
pub use self::integral::{box_sum, box_sum_masked, IntegralImage};
pub use self::pyramid::{build_pyramid, pyramid_dims, Downsample, Pyramid, MIN_LEVEL_SIDE};
pub use self::resample::{resample, Blend, Resample, ResampleMethod};

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(field: &ScalarField, sigma: f64) -> ScalarField {
    if sigma <= 0.0 {
        return field.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let (w, h) = field.dims();
    let horizontal: ScalarField = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * field.get_clamped(x as isize + i as isize - radius, y as isize))
            .sum()
    });
    Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * horizontal.get_clamped(x as isize, y as isize + i as isize - radius))
            .sum()
    })
}
