//! Spectral-residual saliency.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::raster::{gaussian_blur, Grid, RasterImage, Resample, ResampleMethod, ScalarField};

/// Width of the working raster the spectrum is analysed at.
pub const WORKING_WIDTH: usize = 64;
/// Smoothing of the saliency map at working resolution, in working pixels.
const WORKING_SIGMA: f64 = 2.5;
const AMPLITUDE_FLOOR: f64 = 1e-3;

/// Per-pixel saliency in [0,1]. A flat image yields an all-zero field.
pub fn saliency(image: &RasterImage) -> ScalarField {
    let gray = image.to_srgb().intensity();
    let (w, h) = gray.dims();
    let (lo, hi) = gray.min_max();
    if hi - lo < 1e-6 {
        return ScalarField::filled(w, h, 0.0);
    }
    let ww = WORKING_WIDTH;
    let wh = ((h as f64 * ww as f64 / w as f64).round() as usize).max(1);
    let small = gray
        .resize(ww, wh, ResampleMethod::Bicubic)
        .expect("working size is positive");

    let mean = small.mean();
    let mut spectrum: Vec<Complex<f64>> = small
        .as_slice()
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    fft2(&mut spectrum, ww, wh, false);

    // Exact spectral zeros (common on synthetic input) would dominate the
    // residual, so amplitudes are floored relative to the peak.
    let peak = spectrum.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = (peak * AMPLITUDE_FLOOR).max(1e-300);
    let log_amp: Vec<f64> = spectrum.iter().map(|c| c.norm().max(floor).ln()).collect();
    let phase: Vec<f64> = spectrum.iter().map(|c| c.arg()).collect();
    // 3x3 circular mean of the log spectrum.
    let mut residual = vec![0.0; ww * wh];
    for y in 0..wh {
        for x in 0..ww {
            let mut acc = 0.0;
            for dy in [wh - 1, 0, 1] {
                for dx in [ww - 1, 0, 1] {
                    acc += log_amp[((y + dy) % wh) * ww + (x + dx) % ww];
                }
            }
            residual[y * ww + x] = log_amp[y * ww + x] - acc / 9.0;
        }
    }
    for i in 0..spectrum.len() {
        spectrum[i] = Complex::from_polar(residual[i].exp(), phase[i]);
    }
    fft2(&mut spectrum, ww, wh, true);

    let raw = Grid::from_vec(ww, wh, spectrum.iter().map(|c| c.norm_sqr()).collect());
    let smoothed = gaussian_blur(&raw, WORKING_SIGMA);
    let full = smoothed
        .resize(w, h, ResampleMethod::Bicubic)
        .expect("input size is positive");
    let full = gaussian_blur(&full, w as f64 / ww as f64);
    full.normalized()
}

fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    if inverse {
        let n = (w * h) as f64;
        data.iter_mut().for_each(|c| *c /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ColorSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_has_no_saliency() {
        let img = RasterImage::filled(64, 64, [0.3, 0.3, 0.3], ColorSpace::Srgb);
        let s = saliency(&img);
        assert!(s.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bright_blob_stands_out() {
        let img = RasterImage::from_fn(64, 64, ColorSpace::Srgb, |x, y| {
            if (30..34).contains(&x) && (20..24).contains(&y) {
                [0.95; 3]
            } else {
                [0.05; 3]
            }
        });
        let s = saliency(&img);
        let (mut blob, mut nb, mut bg, mut nbg) = (0.0, 0, 0.0, 0);
        for y in 0..64 {
            for x in 0..64 {
                if (30..34).contains(&x) && (20..24).contains(&y) {
                    blob += s.get(x, y);
                    nb += 1;
                } else {
                    bg += s.get(x, y);
                    nbg += 1;
                }
            }
        }
        let (blob, bg) = (blob / nb as f64, bg / nbg as f64);
        assert!(blob > 3.0 * bg, "blob {blob} background {bg}");
    }

    #[test]
    fn range_is_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (w, h) in [(50, 40), (97, 13), (64, 64)] {
            let img = RasterImage::from_fn(w, h, ColorSpace::Srgb, |_, _| {
                [rng.gen(), rng.gen(), rng.gen()]
            });
            let s = saliency(&img);
            assert_eq!(s.dims(), (w, h));
            assert!(s.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn deterministic() {
        let img = RasterImage::from_fn(40, 30, ColorSpace::Srgb, |x, y| {
            [((x * y) % 7) as f64 / 7.0, 0.2, 0.4]
        });
        assert_eq!(saliency(&img), saliency(&img));
    }
}
