use glyphforge::raster::*;
use proptest::prelude::*;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h).prop_map(move |v| Grid::from_vec(w, h, v))
    })
}

fn field_strategy(max: usize) -> impl Strategy<Value = ScalarField> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(-1.0f64..=1.0, w * h).prop_map(move |v| Grid::from_vec(w, h, v))
    })
}

fn brute_distance(m: &BinaryMask) -> ScalarField {
    let (w, h) = m.dims();
    Grid::from_fn(w, h, |x, y| {
        let mut best = i64::MAX;
        for yy in 0..h {
            for xx in 0..w {
                if m.get(xx, yy) != m.get(x, y) {
                    best = best.min((xx as i64 - x as i64).pow(2) + (yy as i64 - y as i64).pow(2));
                }
            }
        }
        (best as f64).sqrt()
    })
}

#[test]
fn distance_of_single_hole() {
    let m: BinaryMask = Grid::from_fn(5, 5, |x, y| (x, y) != (2, 2));
    let d = distance_transform(&m).unwrap();
    assert_eq!(*d.get(2, 2), 1.0);
    assert_eq!(*d.get(0, 0), (8.0f64).sqrt());
    assert!(distance_transform(&BinaryMask::filled(4, 4, true)).is_err());
}

#[test]
fn signed_distance_sign_follows_mask() {
    let m: BinaryMask = Grid::from_fn(9, 7, |x, _| x < 4);
    let s = signed_distance(&m).unwrap();
    assert_eq!(*s.get(3, 3), 1.0);
    assert_eq!(*s.get(4, 3), -1.0);
    assert_eq!(*s.get(0, 0), 4.0);
}

#[test]
fn pyramid_of_constant_mask_stays_constant() {
    let p = build_pyramid(&BinaryMask::filled(64, 64, true), 2).unwrap();
    assert_eq!(p.level(2).dims(), (16, 16));
    assert!(p.level(2).as_slice().iter().all(|&v| v));
    assert!(build_pyramid(&BinaryMask::filled(20, 20, true), 2).is_err());
}

#[test]
fn box_sum_rejects_oversized_window() {
    assert!(box_sum(&ScalarField::filled(4, 4, 1.0), 5, 1).is_err());
    assert!(box_sum(&ScalarField::filled(4, 4, 1.0), 0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn distance_matches_brute_force(m in mask_strategy(32)) {
        prop_assume!(m.uniform_value().is_none());
        prop_assert_eq!(distance_transform(&m).unwrap(), brute_distance(&m));
    }

    #[test]
    fn box_sum_matches_naive(f in field_strategy(24), rw in 1usize..8, rh in 1usize..8) {
        let (w, h) = f.dims();
        prop_assume!(rw <= w && rh <= h);
        let sums = box_sum(&f, rw, rh).unwrap();
        for y in 0..h {
            for x in 0..w {
                let got = *sums.get(x, y);
                if x + rw <= w && y + rh <= h {
                    let mut naive = 0.0;
                    for yy in y..y + rh {
                        for xx in x..x + rw {
                            naive += f.get(xx, yy);
                        }
                    }
                    prop_assert!((got.unwrap() - naive).abs() <= 1e-9);
                } else {
                    prop_assert!(got.is_none());
                }
            }
        }
    }

    #[test]
    fn integral_rect_sum_matches_naive(f in field_strategy(16), a in any::<(u8, u8, u8, u8)>()) {
        let (w, h) = f.dims();
        let (mut x0, mut x1) = (a.0 as usize % (w + 1), a.1 as usize % (w + 1));
        let (mut y0, mut y1) = (a.2 as usize % (h + 1), a.3 as usize % (h + 1));
        if x0 > x1 { std::mem::swap(&mut x0, &mut x1); }
        if y0 > y1 { std::mem::swap(&mut y0, &mut y1); }
        let naive: f64 = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).map(|(x, y)| *f.get(x, y)).sum();
        prop_assert!((IntegralImage::new(&f).sum(x0, y0, x1, y1) - naive).abs() <= 1e-9);
    }

    #[test]
    fn binarize_is_idempotent(f in field_strategy(20), t in 0.05f64..0.95) {
        let once = binarize(&f, t);
        prop_assert_eq!(binarize(&once.to_field(), t), once);
    }

    #[test]
    fn pyramid_dims_halve_with_ceiling(w in 8usize..200, h in 8usize..200, top in 0usize..4) {
        let dims = pyramid_dims(w, h, top);
        prop_assert_eq!(dims.len(), top + 1);
        prop_assert_eq!(dims[0], (w, h));
        for pair in dims.windows(2) {
            prop_assert_eq!(pair[1], (pair[0].0.div_ceil(2), pair[0].1.div_ceil(2)));
        }
        if let Ok(p) = build_pyramid(&BinaryMask::filled(w, h, false), top) {
            let got: Vec<_> = p.levels().iter().map(|l| l.dims()).collect();
            prop_assert_eq!(got, dims);
        }
    }
}
