use crate::error::{Error, Result};
use crate::raster::{distance_transform, BinaryMask, Grid};

/// One 8-connected foreground component of the text mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Inclusive bounding box `(x0, y0, x1, y1)`.
    pub bbox: (usize, usize, usize, usize),
    /// Endpoints of this component's skeleton.
    pub endpoints: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<(usize, usize)>,
    /// Skeletal pixels with exactly one skeletal 8-neighbour.
    pub endpoints: Vec<(usize, usize)>,
    /// Mean distance-to-background over skeletal pixels.
    pub mean_stroke_radius: f64,
    pub components: Vec<Component>,
}

impl Skeleton {
    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::filled(self.width, self.height, false);
        for &(x, y) in &self.pixels {
            m.set(x, y, true);
        }
        m
    }
}

const OFFSETS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn neighbours(m: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let (w, h) = m.dims();
    let mut out = [false; 8];
    for (k, (dx, dy)) in OFFSETS.iter().enumerate() {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        out[k] = nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && *m.get(nx as usize, ny as usize);
    }
    out
}

/// Zhang–Suen thinning.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut m = mask.clone();
    let (w, h) = m.dims();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if !*m.get(x, y) {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let n = neighbours(&m, x, y);
                    let b = n.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let ok = if pass == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        remove.push((x, y));
                    }
                }
            }
            changed |= !remove.is_empty();
            for (x, y) in remove {
                m.set(x, y, false);
            }
        }
        if !changed {
            return m;
        }
    }
}

pub fn skeletonize(mask: &BinaryMask) -> Result<Skeleton> {
    if mask.count_ones() == 0 {
        return Err(Error::EmptyForeground);
    }
    let (w, h) = mask.dims();
    let thinned = thin(mask);
    // A fully covered image has no background to measure against.
    let dist = match mask.uniform_value() {
        Some(_) => Grid::filled(w, h, (w.min(h) as f64) / 2.0),
        None => distance_transform(mask)?,
    };
    let mut pixels = Vec::new();
    let mut endpoints = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *thinned.get(x, y) {
                pixels.push((x, y));
                if neighbours(&thinned, x, y).iter().filter(|&&v| v).count() == 1 {
                    endpoints.push((x, y));
                }
            }
        }
    }
    let mean_stroke_radius = pixels.iter().map(|&(x, y)| *dist.get(x, y)).sum::<f64>() / pixels.len() as f64;

    let (labels, count) = mask.connected_components();
    let mut components: Vec<Component> = (0..count)
        .map(|_| Component {
            bbox: (usize::MAX, usize::MAX, 0, 0),
            endpoints: Vec::new(),
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let l = *labels.get(x, y) as usize;
            if l > 0 {
                let b = &mut components[l - 1].bbox;
                *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
            }
        }
    }
    for &(x, y) in &endpoints {
        let l = *labels.get(x, y) as usize;
        components[l - 1].endpoints.push((x, y));
    }
    Ok(Skeleton {
        width: w,
        height: h,
        pixels,
        endpoints,
        mean_stroke_radius,
        components,
    })
}
