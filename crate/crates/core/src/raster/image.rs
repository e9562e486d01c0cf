use super::grid::{Grid, ScalarField};

/// Colour space a [`RasterImage`] is stored in.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    /// Gamma-encoded sRGB, components in [0,1].
    Srgb,
    /// CIELab (D65), stored as `L/100`, `(a+128)/255`, `(b+128)/255`.
    Lab,
}

/// Three-channel raster with components in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    pixels: Grid<[f64; 3]>,
    space: ColorSpace,
}

impl RasterImage {
    pub fn new(pixels: Grid<[f64; 3]>, space: ColorSpace) -> Self {
        debug_assert!(pixels
            .as_slice()
            .iter()
            .all(|p| p.iter().all(|c| c.is_finite())));
        RasterImage { pixels, space }
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3], space: ColorSpace) -> Self {
        RasterImage::new(Grid::filled(width, height, value), space)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        space: ColorSpace,
        f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        RasterImage::new(Grid::from_fn(width, height, f), space)
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn pixels(&self) -> &Grid<[f64; 3]> {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut Grid<[f64; 3]> {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        *self.pixels.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f64; 3]) {
        self.pixels.set(x, y, value);
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RasterImage {
        RasterImage::new(self.pixels.crop(x0, y0, w, h), self.space)
    }

    pub fn channel(&self, c: usize) -> ScalarField {
        self.pixels.map(|p| p[c])
    }

    pub fn to_lab(&self) -> RasterImage {
        match self.space {
            ColorSpace::Lab => self.clone(),
            ColorSpace::Srgb => RasterImage::new(
                self.pixels.map(|&p| encode_lab(srgb_to_lab(p))),
                ColorSpace::Lab,
            ),
        }
    }

    /// Converts to sRGB, clamping out-of-gamut colours.
    pub fn to_srgb(&self) -> RasterImage {
        match self.space {
            ColorSpace::Srgb => self.clone(),
            ColorSpace::Lab => RasterImage::new(
                self.pixels.map(|&p| {
                    let rgb = lab_to_srgb(decode_lab(p));
                    [
                        rgb[0].clamp(0.0, 1.0),
                        rgb[1].clamp(0.0, 1.0),
                        rgb[2].clamp(0.0, 1.0),
                    ]
                }),
                ColorSpace::Srgb,
            ),
        }
    }

    /// Perceptual intensity in [0,1]: Rec. 601 luma for sRGB, `L/100` for Lab.
    pub fn intensity(&self) -> ScalarField {
        match self.space {
            ColorSpace::Srgb => self
                .pixels
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]),
            ColorSpace::Lab => self.pixels.map(|p| p[0]),
        }
    }
}

/// Rescales CIELab into the [0,1] storage convention.
#[inline]
pub fn encode_lab(lab: [f64; 3]) -> [f64; 3] {
    [
        (lab[0] / 100.0).clamp(0.0, 1.0),
        ((lab[1] + 128.0) / 255.0).clamp(0.0, 1.0),
        ((lab[2] + 128.0) / 255.0).clamp(0.0, 1.0),
    ]
}

#[inline]
pub fn decode_lab(stored: [f64; 3]) -> [f64; 3] {
    [
        stored[0] * 100.0,
        stored[1] * 255.0 - 128.0,
        stored[2] * 255.0 - 128.0,
    ]
}

const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.max(0.0).powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// sRGB in [0,1] to CIELab (L in [0,100]).
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// CIELab to (unclamped) sRGB.
pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let x = WHITE[0] * lab_f_inv(fx);
    let y = WHITE[1] * lab_f_inv(fy);
    let z = WHITE[2] * lab_f_inv(fz);
    let r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    let g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    let b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lab_round_trip() {
        for &rgb in &[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.2, 0.7, 0.4], [0.9, 0.1, 0.5]] {
            let back = lab_to_srgb(srgb_to_lab(rgb));
            for c in 0..3 {
                assert!((back[c] - rgb[c]).abs() < 1e-6, "{rgb:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn white_is_l100() {
        let lab = srgb_to_lab([1.0, 1.0, 1.0]);
        assert!((lab[0] - 100.0).abs() < 1e-3);
        assert!(lab[1].abs() < 1e-2 && lab[2].abs() < 1e-2);
    }

    #[test]
    fn stored_lab_in_unit_range() {
        let img = RasterImage::from_fn(8, 8, ColorSpace::Srgb, |x, y| {
            [x as f64 / 7.0, y as f64 / 7.0, ((x + y) % 3) as f64 / 2.0]
        });
        let lab = img.to_lab();
        for p in lab.pixels().as_slice() {
            assert!(p.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }
}
