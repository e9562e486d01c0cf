//! Per-category colour statistics transfer between a style image and a
//! background.

use rayon::prelude::*;

use crate::raster::{decode_lab, lab_to_srgb, srgb_to_lab, ColorSpace, Grid, RasterImage};

/// Share of pixels a category needs in both images to get its own transform.
pub const MIN_SHARE: f64 = 0.005;
/// Style channel deviation below which a category falls back to the global transform.
pub const MIN_STD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorCategory {
    Black,
    Blue,
    Brown,
    Gray,
    Green,
    Orange,
    Pink,
    Purple,
    Red,
    White,
    Yellow,
}

impl ColorCategory {
    pub const ALL: [ColorCategory; 11] = [
        ColorCategory::Black,
        ColorCategory::Blue,
        ColorCategory::Brown,
        ColorCategory::Gray,
        ColorCategory::Green,
        ColorCategory::Orange,
        ColorCategory::Pink,
        ColorCategory::Purple,
        ColorCategory::Red,
        ColorCategory::White,
        ColorCategory::Yellow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ColorCategory::Black => "black",
            ColorCategory::Blue => "blue",
            ColorCategory::Brown => "brown",
            ColorCategory::Gray => "gray",
            ColorCategory::Green => "green",
            ColorCategory::Orange => "orange",
            ColorCategory::Pink => "pink",
            ColorCategory::Purple => "purple",
            ColorCategory::Red => "red",
            ColorCategory::White => "white",
            ColorCategory::Yellow => "yellow",
        }
    }

    /// Prototype colour in sRGB.
    pub fn prototype_srgb(self) -> [f64; 3] {
        let c = match self {
            ColorCategory::Black => [0, 0, 0],
            ColorCategory::Blue => [30, 60, 200],
            ColorCategory::Brown => [130, 75, 35],
            ColorCategory::Gray => [128, 128, 128],
            ColorCategory::Green => [30, 150, 40],
            ColorCategory::Orange => [245, 140, 20],
            ColorCategory::Pink => [245, 160, 200],
            ColorCategory::Purple => [120, 40, 150],
            ColorCategory::Red => [210, 25, 30],
            ColorCategory::White => [255, 255, 255],
            ColorCategory::Yellow => [250, 225, 30],
        };
        [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0]
    }

    /// Prototype colour in CIELab.
    pub fn prototype_lab(self) -> [f64; 3] {
        srgb_to_lab(self.prototype_srgb())
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Nearest prototype in CIELab for a colour given in CIELab.
pub fn nearest_category(lab: [f64; 3]) -> ColorCategory {
    let protos = prototypes();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in protos.iter().enumerate() {
        let d = (0..3).map(|c| (lab[c] - p[c]).powi(2)).sum::<f64>();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    ColorCategory::ALL[best]
}

fn prototypes() -> [[f64; 3]; 11] {
    ColorCategory::ALL.map(|c| c.prototype_lab())
}

/// Channel statistics of one category, in the stored Lab encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CategoryStats {
    pub count: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl CategoryStats {
    fn from_pixels<'a>(pixels: impl Iterator<Item = &'a [f64; 3]>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for p in pixels {
            n += 1;
            for c in 0..3 {
                sum[c] += p[c];
                sq[c] += p[c] * p[c];
            }
        }
        if n == 0 {
            return CategoryStats::default();
        }
        let nf = n as f64;
        let mean = sum.map(|s| s / nf);
        let std = [0, 1, 2].map(|c| (sq[c] / nf - mean[c] * mean[c]).max(0.0).sqrt());
        CategoryStats { count: n, mean, std }
    }
}

/// Hard category assignment of every pixel plus per-category statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorCategoryModel {
    pub labels: Grid<ColorCategory>,
    pub stats: [CategoryStats; 11],
    pub global: CategoryStats,
}

impl ColorCategoryModel {
    pub fn stats_of(&self, c: ColorCategory) -> &CategoryStats {
        &self.stats[c.index()]
    }

    pub fn share(&self, c: ColorCategory) -> f64 {
        self.stats[c.index()].count as f64 / self.labels.len() as f64
    }
}

/// Assigns each pixel to its nearest prototype and gathers statistics in
/// the stored Lab encoding.
pub fn categorize(image: &RasterImage) -> ColorCategoryModel {
    let lab = image.to_lab();
    let px = lab.pixels().as_slice();
    let labels: Vec<ColorCategory> = px.par_iter().map(|&p| nearest_category(decode_lab(p))).collect();
    let stats = ColorCategory::ALL.map(|cat| {
        CategoryStats::from_pixels(px.iter().zip(&labels).filter(|(_, &l)| l == cat).map(|(p, _)| p))
    });
    ColorCategoryModel {
        labels: Grid::from_vec(image.width(), image.height(), labels),
        stats,
        global: CategoryStats::from_pixels(px.iter()),
    }
}

/// Per-channel affine map `out = a * in + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelMap {
    pub scale: [f64; 3],
    pub offset: [f64; 3],
}

impl ChannelMap {
    fn between(from: &CategoryStats, to: &CategoryStats) -> Self {
        let mut scale = [1.0; 3];
        let mut offset = [0.0; 3];
        for c in 0..3 {
            if from.std[c] >= MIN_STD {
                scale[c] = to.std[c] / from.std[c];
            }
            offset[c] = to.mean[c] - scale[c] * from.mean[c];
        }
        ChannelMap { scale, offset }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|c| self.scale[c] * p[c] + self.offset[c])
    }
}

/// Outcome of a transfer, with enough detail to audit it.
#[derive(Clone, Debug)]
pub struct ColorTransfer {
    /// Recoloured style in the stored Lab encoding.
    pub image: RasterImage,
    /// Categories of the input style.
    pub style_model: ColorCategoryModel,
    pub background_model: ColorCategoryModel,
    /// Map used per style category; `None` means the global map was used.
    pub maps: [Option<ChannelMap>; 11],
    pub global_map: ChannelMap,
    /// Whether any pixel of the category hit the Lab range or the sRGB gamut.
    pub clamped: [bool; 11],
}

fn category_map(st: &CategoryStats, bg: &CategoryStats, st_total: usize, bg_total: usize) -> Option<ChannelMap> {
    let share_ok = st.count as f64 >= MIN_SHARE * st_total as f64 && bg.count as f64 >= MIN_SHARE * bg_total as f64;
    if st.count == 0 || bg.count == 0 || !share_ok || st.std.iter().any(|&s| s < MIN_STD) {
        return None;
    }
    Some(ChannelMap::between(st, bg))
}

fn in_gamut(stored: [f64; 3]) -> bool {
    let rgb = lab_to_srgb(decode_lab(stored));
    rgb.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v))
}

/// Moves the colour statistics of `style` toward those of `background`,
/// category by category.
pub fn transfer_colors_detailed(style: &RasterImage, background: &RasterImage) -> ColorTransfer {
    let sm = categorize(style);
    let bm = categorize(background);
    let (st_total, bg_total) = (sm.labels.len(), bm.labels.len());
    let maps: [Option<ChannelMap>; 11] = ColorCategory::ALL
        .map(|c| category_map(&sm.stats[c.index()], &bm.stats[c.index()], st_total, bg_total));
    let global_map = ChannelMap::between(&sm.global, &bm.global);
    let lab = style.to_lab();
    let out: Vec<([f64; 3], bool)> = lab
        .pixels()
        .as_slice()
        .par_iter()
        .zip(sm.labels.as_slice())
        .map(|(&p, &cat)| {
            let raw = maps[cat.index()].unwrap_or(global_map).apply(p);
            let stored = raw.map(|v| v.clamp(0.0, 1.0));
            let clamped = stored != raw || !in_gamut(stored);
            (stored, clamped)
        })
        .collect();
    let mut clamped = [false; 11];
    for ((_, c), &cat) in out.iter().zip(sm.labels.as_slice()) {
        clamped[cat.index()] |= *c;
    }
    let pixels = Grid::from_vec(style.width(), style.height(), out.into_iter().map(|(p, _)| p).collect());
    ColorTransfer {
        image: RasterImage::new(pixels, ColorSpace::Lab),
        style_model: sm,
        background_model: bm,
        maps,
        global_map,
        clamped,
    }
}

/// Recoloured style, in sRGB clamped to the gamut.
pub fn transfer_colors(style: &RasterImage, background: &RasterImage) -> RasterImage {
    transfer_colors_detailed(style, background).image.to_srgb()
}
