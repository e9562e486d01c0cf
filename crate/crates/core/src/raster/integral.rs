use super::grid::{BinaryMask, Grid, ScalarField};
use crate::error::{Error, Result};

/// Summed-area table with one row and column of zero padding.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(field: &ScalarField) -> Self {
        let (w, h) = field.dims();
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += field.get(x, y);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        IntegralImage {
            width: w,
            height: h,
            table,
        }
    }

    /// Sum over the half-open window `[x0, x1) x [y0, y1)`.
    #[inline]
    pub fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        debug_assert!(x1 <= self.width && y1 <= self.height);
        let s = self.width + 1;
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0]
            + self.table[y0 * s + x0]
    }
}

/// Windowed sums anchored at the window's top-left corner.
///
/// The output has the dimensions of `field`; entry `(x, y)` is the sum over
/// `[x, x+rect_w) x [y, y+rect_h)` when that window lies inside the field and
/// `None` otherwise.
pub fn box_sum(field: &ScalarField, rect_w: usize, rect_h: usize) -> Result<Grid<Option<f64>>> {
    let (w, h) = field.dims();
    if rect_w == 0 || rect_h == 0 || rect_w > w || rect_h > h {
        return Err(Error::RectTooLarge {
            rect_w,
            rect_h,
            width: w,
            height: h,
        });
    }
    let ii = IntegralImage::new(field);
    Ok(Grid::from_fn(w, h, |x, y| {
        (x + rect_w <= w && y + rect_h <= h).then(|| ii.sum(x, y, x + rect_w, y + rect_h))
    }))
}

/// Like [`box_sum`], but additionally marks windows touching any pixel with
/// `valid == false` as invalid.
pub fn box_sum_masked(
    field: &ScalarField,
    valid: &BinaryMask,
    rect_w: usize,
    rect_h: usize,
) -> Result<Grid<Option<f64>>> {
    valid.ensure_dims(field.dims())?;
    let sums = box_sum(field, rect_w, rect_h)?;
    let invalid = IntegralImage::new(&valid.map(|&v| if v { 0.0 } else { 1.0 }));
    Ok(Grid::from_fn(field.width(), field.height(), |x, y| {
        sums.get(x, y)
            .filter(|_| invalid.sum(x, y, x + rect_w, y + rect_h) < 0.5)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(field: &ScalarField, rw: usize, rh: usize) -> Grid<Option<f64>> {
        let (w, h) = field.dims();
        Grid::from_fn(w, h, |x, y| {
            if x + rw > w || y + rh > h {
                return None;
            }
            let mut s = 0.0;
            for yy in y..y + rh {
                for xx in x..x + rw {
                    s += field.get(xx, yy);
                }
            }
            Some(s)
        })
    }

    #[test]
    fn constant_field_window_sum() {
        let f = ScalarField::filled(10, 9, 0.25);
        let s = box_sum(&f, 3, 4).unwrap();
        for y in 0..9 {
            for x in 0..10 {
                match s.get(x, y) {
                    Some(v) => {
                        assert!(x + 3 <= 10 && y + 4 <= 9);
                        assert!((v - 12.0 * 0.25).abs() < 1e-12);
                    }
                    None => assert!(x + 3 > 10 || y + 4 > 9),
                }
            }
        }
    }

    #[test]
    fn impulse_gives_window_footprint() {
        let mut f = ScalarField::filled(8, 8, 0.0);
        f.set(4, 5, 1.0);
        let s = box_sum(&f, 3, 2).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if let Some(v) = s.get(x, y) {
                    let covers = (x..x + 3).contains(&4) && (y..y + 2).contains(&5);
                    assert_eq!(*v, if covers { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn random_field_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0));
        let fast = box_sum(&f, 3, 3).unwrap();
        let slow = naive(&f, 3, 3);
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
                (None, None) => {}
                _ => panic!("validity mismatch"),
            }
        }
    }

    #[test]
    fn oversized_window_rejected() {
        let f = ScalarField::filled(5, 5, 1.0);
        assert!(matches!(box_sum(&f, 6, 2), Err(Error::RectTooLarge { .. })));
    }

    #[test]
    fn masked_windows_exclude_invalid_pixels() {
        let f = ScalarField::filled(6, 6, 1.0);
        let mut valid = BinaryMask::filled(6, 6, true);
        valid.set(0, 0, false);
        let s = box_sum_masked(&f, &valid, 2, 2).unwrap();
        assert!(s.get(0, 0).is_none());
        assert!(s.get(1, 0).is_some());
    }

    proptest::proptest! {
        #[test]
        fn box_sum_matches_naive_sum(
            w in 1usize..14, h in 1usize..14, rw in 1usize..14, rh in 1usize..14, seed in 0u64..1000
        ) {
            proptest::prop_assume!(rw <= w && rh <= h);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::from_fn(w, h, |_, _| rng.gen_range(-1.0..=1.0));
            let fast = box_sum(&f, rw, rh).unwrap();
            let slow = naive(&f, rw, rh);
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                match (a, b) {
                    (Some(a), Some(b)) => proptest::prop_assert!((a - b).abs() <= 1e-9),
                    (None, None) => {}
                    _ => proptest::prop_assert!(false, "validity mismatch"),
                }
            }
        }
    }
}
