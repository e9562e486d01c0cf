use crate::error::{Error, Result};

/// Row-major 2D grid of values.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Two-valued mask. `true` is foreground (white), `false` background.
pub type BinaryMask = Grid<bool>;

/// Real-valued per-pixel field (saliency, distances, cost maps, blend weights).
pub type ScalarField = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width >= 1 && height >= 1, "grid dimensions must be positive");
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert!(width >= 1 && height >= 1, "grid dimensions must be positive");
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width >= 1 && height >= 1, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let w = self.width;
        self.data[y * w + x] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        let w = self.width;
        &mut self.data[y * w + x]
    }

    /// Value at a possibly out-of-range coordinate, clamped to the nearest edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> &T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        &self.data[yc * self.width + xc]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    /// Copy of the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Grid<T>
    where
        T: Clone,
    {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop outside grid");
        Grid::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y).clone())
    }
}

impl Grid<bool> {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Returns `Some(value)` when every pixel holds the same value.
    pub fn uniform_value(&self) -> Option<bool> {
        let first = self.data[0];
        self.data.iter().all(|&v| v == first).then_some(first)
    }

    pub fn ensure_non_uniform(&self) -> Result<()> {
        match self.uniform_value() {
            Some(value) => Err(Error::UniformMask { value }),
            None => Ok(()),
        }
    }

    pub fn complement(&self) -> BinaryMask {
        self.map(|&v| !v)
    }

    pub fn to_field(&self) -> ScalarField {
        self.map(|&v| if v { 1.0 } else { 0.0 })
    }

    /// Bounding box `(x0, y0, x1, y1)` (inclusive) of the foreground.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if *self.get(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                    });
                }
            }
        }
        bbox
    }

    /// Whether the pixel differs from at least one of its in-image 4-neighbours.
    pub fn is_contour(&self, x: usize, y: usize) -> bool {
        let v = *self.get(x, y);
        (x > 0 && *self.get(x - 1, y) != v)
            || (x + 1 < self.width && *self.get(x + 1, y) != v)
            || (y > 0 && *self.get(x, y - 1) != v)
            || (y + 1 < self.height && *self.get(x, y + 1) != v)
    }

    /// Morphological dilation with a Euclidean disk of the given radius.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let r2 = r * r;
        let mut out = BinaryMask::filled(self.width, self.height, false);
        for y in 0..self.height {
            for x in 0..self.width {
                if !*self.get(x, y) {
                    continue;
                }
                for dy in -r..=r {
                    let yy = y as isize + dy;
                    if yy < 0 || yy >= self.height as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let xx = x as isize + dx;
                        if xx < 0 || xx >= self.width as isize || dx * dx + dy * dy > r2 {
                            continue;
                        }
                        out.set(xx as usize, yy as usize, true);
                    }
                }
            }
        }
        out
    }

    /// 8-connected foreground components, labelled `1..=count` (0 = background).
    pub fn connected_components(&self) -> (Grid<u32>, usize) {
        let mut labels = Grid::filled(self.width, self.height, 0u32);
        let mut count = 0u32;
        let mut stack = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !*self.get(x, y) || *labels.get(x, y) != 0 {
                    continue;
                }
                count += 1;
                labels.set(x, y, count);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let nx = cx as isize + dx;
                            let ny = cy as isize + dy;
                            if nx < 0
                                || ny < 0
                                || nx >= self.width as isize
                                || ny >= self.height as isize
                            {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if *self.get(nx, ny) && *labels.get(nx, ny) == 0 {
                                labels.set(nx, ny, count);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
        (labels, count as usize)
    }
}

impl Grid<f64> {
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Affine rescale to [0,1]; a constant field maps to all zeros.
    pub fn normalized(&self) -> ScalarField {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if !(span > 1e-12) {
            return ScalarField::filled(self.width, self.height, 0.0);
        }
        self.map(|&v| (v - lo) / span)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample with edge clamping.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xf = x.clamp(0.0, (self.width - 1) as f64);
        let yf = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xf.floor() as usize;
        let y0 = yf.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = xf - x0 as f64;
        let ty = yf - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
        let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Output mask is 1 exactly where `field >= threshold`.
pub fn binarize(field: &ScalarField, threshold: f64) -> BinaryMask {
    field.map(|&v| v >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binarize_constant_above_threshold() {
        let f = ScalarField::filled(4, 3, 0.7);
        assert_eq!(binarize(&f, 0.5).count_ones(), 12);
    }

    #[test]
    fn binarize_at_threshold_is_foreground() {
        let f = ScalarField::filled(5, 5, 0.5);
        assert_eq!(binarize(&f, 0.5).count_ones(), 25);
    }

    #[test]
    fn binarize_matches_pixel_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::from_fn(8, 8, |_, _| rng.gen::<f64>());
        let m = binarize(&f, 0.5);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(*m.get(x, y), *f.get(x, y) >= 0.5);
            }
        }
    }

    #[test]
    fn binarize_is_idempotent_on_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = BinaryMask::from_fn(7, 5, |_, _| rng.gen_bool(0.4));
        let once = binarize(&m.to_field(), 0.5);
        let twice = binarize(&once.to_field(), 0.5);
        assert_eq!(once, m);
        assert_eq!(twice, once);
    }

    #[test]
    fn components_of_two_blocks() {
        let m = BinaryMask::from_fn(10, 4, |x, _| !(3..=6).contains(&x));
        let (labels, count) = m.connected_components();
        assert_eq!(count, 2);
        assert_ne!(labels.get(0, 0), labels.get(9, 0));
    }

    #[test]
    fn dilate_single_pixel_is_disk() {
        let mut m = BinaryMask::filled(11, 11, false);
        m.set(5, 5, true);
        let d = m.dilate(2);
        assert_eq!(d.count_ones(), 13);
    }
}
