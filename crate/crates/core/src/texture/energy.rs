use crate::error::{Error, Result};
use crate::raster::{distance_transform, BinaryMask, Grid, RasterImage, ScalarField};
use crate::structure::skeletonize;

/// Weight of the guidance-mask channel inside the appearance term.
pub const GUIDE_WEIGHT: f64 = 2.0;
/// Truncation window of the normalized distance maps.
pub const DIST_RANGE: (f64, f64) = (0.5, 2.0);

/// Distance map normalized so that boundary pixels read exactly 1, growing
/// inward and shrinking outward by one unit per `radius` pixels, clamped to
/// [`DIST_RANGE`]. A uniform mask reads as deep inside or deep outside.
pub fn truncated_distance(mask: &BinaryMask, radius: f64) -> Result<ScalarField> {
    if let Some(v) = mask.uniform_value() {
        let fill = if v { DIST_RANGE.1 } else { DIST_RANGE.0 };
        return Ok(ScalarField::filled(mask.width(), mask.height(), fill));
    }
    let raw = distance_transform(mask)?;
    Ok(Grid::from_fn(mask.width(), mask.height(), |x, y| {
        let d = (raw.get(x, y) - 1.0) / radius;
        let v = if *mask.get(x, y) { 1.0 + d } else { 1.0 - d };
        v.clamp(DIST_RANGE.0, DIST_RANGE.1)
    }))
}

/// `1 - exp(-d^2 / 2 sigma^2)` with `d` the distance to the shape boundary
/// (0 on boundary pixels). A uniform mask has no boundary and weighs 1.
pub fn legibility_weight(mask: &BinaryMask, sigma: f64) -> ScalarField {
    match distance_transform(mask) {
        Ok(raw) => raw.map(|&d| 1.0 - (-(d - 1.0).powi(2) / (2.0 * sigma * sigma)).exp()),
        Err(_) => ScalarField::filled(mask.width(), mask.height(), 1.0),
    }
}

/// Mean stroke radius of a mask, measured on its skeleton.
pub fn stroke_radius(mask: &BinaryMask) -> Result<f64> {
    Ok(skeletonize(mask)?.mean_stroke_radius)
}

/// Guidance maps for one resolution level.
#[derive(Clone, Debug)]
pub struct GuidancePack {
    /// Raw text mask `T` (target space), used by the saliency indicator.
    pub text: BinaryMask,
    pub text_hat: BinaryMask,
    /// Deformed guidance mask `Ŝ` (source space).
    pub guide_hat: BinaryMask,
    pub dist_text: ScalarField,
    pub dist_guide: ScalarField,
    /// Source saliency in [0,1].
    pub saliency: ScalarField,
    /// Legibility weight `W` over the target.
    pub weight: ScalarField,
}

impl GuidancePack {
    /// `radii` are the normalization units of the text and guidance distance
    /// maps; `sigma` is the width of `W`.
    pub fn new(
        text: &BinaryMask,
        text_hat: &BinaryMask,
        guide_hat: &BinaryMask,
        saliency: &ScalarField,
        radii: (f64, f64),
        sigma: f64,
    ) -> Result<Self> {
        text.ensure_dims(text_hat.dims())?;
        saliency.ensure_dims(guide_hat.dims())?;
        if !(radii.0 > 0.0 && radii.1 > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distance radii and sigma must be positive, got {radii:?} and {sigma}"
            )));
        }
        Ok(GuidancePack {
            text: text.clone(),
            text_hat: text_hat.clone(),
            guide_hat: guide_hat.clone(),
            dist_text: truncated_distance(text_hat, radii.0)?,
            dist_guide: truncated_distance(guide_hat, radii.1)?,
            saliency: saliency.clone(),
            weight: legibility_weight(text, sigma),
        })
    }
}

/// Term weights of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub distribution: f64,
    pub repetition: f64,
    pub saliency: f64,
}

fn check_patch(dims: (usize, usize), c: (usize, usize), half: usize) -> Result<()> {
    if c.0 < half || c.1 < half || c.0 + half >= dims.0 || c.1 + half >= dims.1 {
        return Err(Error::OutOfBounds { x: c.0, y: c.1 });
    }
    Ok(())
}

/// Mean squared colour difference plus [`GUIDE_WEIGHT`] times the mean
/// squared mask difference over the two patches.
pub fn energy_appearance(
    p: (usize, usize),
    q: (usize, usize),
    target: &RasterImage,
    source: &RasterImage,
    pack: &GuidancePack,
    patch: usize,
) -> Result<f64> {
    let half = patch / 2;
    check_patch(target.dims(), p, half)?;
    check_patch(source.dims(), q, half)?;
    let (mut color, mut guide) = (0.0, 0.0);
    for dy in 0..patch {
        for dx in 0..patch {
            let (tx, ty) = (p.0 + dx - half, p.1 + dy - half);
            let (sx, sy) = (q.0 + dx - half, q.1 + dy - half);
            let a = target.get(tx, ty);
            let b = source.get(sx, sy);
            color += (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
            if pack.text_hat.get(tx, ty) != pack.guide_hat.get(sx, sy) {
                guide += 1.0;
            }
        }
    }
    let n = (patch * patch) as f64;
    Ok(color / (3.0 * n) + GUIDE_WEIGHT * guide / n)
}

pub fn energy_distribution(p: (usize, usize), q: (usize, usize), pack: &GuidancePack) -> f64 {
    (pack.dist_text.get(p.0, p.1) - pack.dist_guide.get(q.0, q.1)).powi(2)
}

pub fn energy_saliency(p: (usize, usize), q: (usize, usize), pack: &GuidancePack) -> f64 {
    let w = *pack.weight.get(p.0, p.1);
    let s = *pack.saliency.get(q.0, q.1);
    if *pack.text.get(p.0, p.1) {
        w * (1.0 - s)
    } else {
        w * s
    }
}

/// Per-term sums of the objective over all target patches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    pub appearance: f64,
    pub distribution: f64,
    pub repetition: f64,
    pub saliency: f64,
}

impl EnergyTerms {
    pub fn total(&self, w: &Weights) -> f64 {
        self.appearance + w.distribution * self.distribution + w.repetition * self.repetition + w.saliency * self.saliency
    }
}

/// Flat 4-channel plane: Lab colour plus the guidance mask scaled so that a
/// plain squared distance over all four channels divided by `3n` equals the
/// appearance term.
#[derive(Clone, Debug)]
pub(crate) struct Planes {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 4]>,
}

pub(crate) fn guide_scale() -> f64 {
    (3.0 * GUIDE_WEIGHT).sqrt()
}

impl Planes {
    pub fn new(image: &RasterImage, mask: &BinaryMask) -> Self {
        let g = guide_scale();
        let data = image
            .pixels()
            .as_slice()
            .iter()
            .zip(mask.as_slice())
            .map(|(c, &m)| [c[0], c[1], c[2], if m { g } else { 0.0 }])
            .collect();
        Planes {
            width: image.width(),
            height: image.height(),
            data,
        }
    }

    pub fn to_image(&self, space: crate::raster::ColorSpace) -> RasterImage {
        RasterImage::new(
            Grid::from_vec(self.width, self.height, self.data.iter().map(|v| [v[0], v[1], v[2]]).collect()),
            space,
        )
    }
}
