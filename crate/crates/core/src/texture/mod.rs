//! Guided patch-based texture synthesis: the stylized target is the
//! minimiser of an appearance + distribution + repetition + saliency
//! objective over a patch correspondence field, optimised coarse to fine.

mod energy;
mod patchmatch;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use self::energy::{
    energy_appearance, energy_distribution, energy_saliency, legibility_weight, stroke_radius, truncated_distance,
    EnergyTerms, GuidancePack, Weights, DIST_RANGE, GUIDE_WEIGHT,
};
pub use self::patchmatch::{nearest_patch_cost, pm_match, vote, NNField, Synthesis};

use crate::error::{Error, Result};
use crate::guidance::saliency;
use crate::raster::{build_pyramid, BinaryMask, ColorSpace, RasterImage, ScalarField};

/// Side the coarsest level's long side is brought close to when the level
/// count is automatic.
pub const TOP_SIDE: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TextureConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Width of the legibility weight; `None` uses the text's mean stroke radius.
    pub sigma1: Option<f64>,
    pub patch: usize,
    /// Number of pyramid levels above the input; `None` picks it from [`TOP_SIDE`].
    pub pyramid_levels: Option<usize>,
    pub em_iters: usize,
    pub pm_iters: usize,
    pub seed: u64,
}

impl Default for TextureConfig {
    fn default() -> Self {
        TextureConfig {
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 0.01,
            sigma1: None,
            patch: 9,
            pyramid_levels: None,
            em_iters: 6,
            pm_iters: 5,
            seed: 7,
        }
    }
}

impl TextureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(s) = self.sigma1 {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!("sigma1 must be > 0, got {s}")));
            }
        }
        if self.patch < 5 || self.patch.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("patch must be odd and >= 5, got {}", self.patch)));
        }
        Ok(())
    }

    pub fn weights(&self) -> Weights {
        Weights {
            distribution: self.lambda1,
            repetition: self.lambda2,
            saliency: self.lambda3,
        }
    }
}

/// Pixels of the target that are pinned to given values after every vote.
#[derive(Clone, Debug)]
pub struct ContextFrame {
    pub fixed: BinaryMask,
    /// sRGB values, target-sized; read only where `fixed` is set.
    pub values: RasterImage,
}

/// Inputs of [`stylize`]. `style` is sRGB.
#[derive(Clone, Copy, Debug)]
pub struct StylizeInput<'a> {
    pub text: &'a BinaryMask,
    pub text_hat: &'a BinaryMask,
    pub guide_hat: &'a BinaryMask,
    pub style: &'a RasterImage,
    pub context: Option<&'a ContextFrame>,
    /// Source pixels that may be copied; unset pixels are never sampled.
    pub source_usable: Option<&'a BinaryMask>,
    /// Precomputed source saliency; computed from `style` when absent.
    pub saliency: Option<&'a ScalarField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    Match,
    Vote,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub level: usize,
    pub iteration: usize,
    pub stage: Stage,
    pub appearance: f64,
    pub distribution: f64,
    pub repetition: f64,
    pub saliency: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct StylizeOutput {
    /// Stylized target in sRGB.
    pub image: RasterImage,
    /// Final full-resolution field.
    pub field: NNField,
    /// Energy after initialisation and after every matching and voting step,
    /// coarsest level first. Empty unless tracing was requested.
    pub trace: Vec<EnergyRecord>,
    pub levels: usize,
}

/// Automatic level count: halve until the long side is within [`TOP_SIDE`],
/// keeping room for a patch at the top.
pub fn auto_levels(dims: (usize, usize), patch: usize) -> usize {
    let (mut w, mut h) = dims;
    let mut levels = 0;
    while w.max(h) > TOP_SIDE && w.div_ceil(2).min(h.div_ceil(2)) >= 2 * patch {
        w = w.div_ceil(2);
        h = h.div_ceil(2);
        levels += 1;
    }
    levels
}

/// Usable-pixel mask pyramid: a coarse pixel is usable only when every
/// finer pixel under it is.
fn usable_pyramid(mask: &BinaryMask, top: usize) -> Result<Vec<BinaryMask>> {
    let blocked = build_pyramid(&mask.complement().to_field(), top)?;
    Ok(blocked.levels().iter().map(|f| f.map(|&v| v == 0.0)).collect())
}

fn record(level: usize, iteration: usize, stage: Stage, syn: &Synthesis, field: &NNField) -> EnergyRecord {
    let t = syn.terms(field);
    EnergyRecord {
        level,
        iteration,
        stage,
        appearance: t.appearance,
        distribution: t.distribution,
        repetition: t.repetition,
        saliency: t.saliency,
        total: t.total(&syn.weights()),
    }
}

pub fn stylize(input: &StylizeInput, cfg: &TextureConfig) -> Result<RasterImage> {
    Ok(stylize_traced(input, cfg, false)?.image)
}

/// Coarse-to-fine synthesis. With `trace` set, the full objective is
/// recomputed after every step.
pub fn stylize_traced(input: &StylizeInput, cfg: &TextureConfig, trace: bool) -> Result<StylizeOutput> {
    cfg.validate()?;
    let tdims = input.text.dims();
    input.text_hat.ensure_dims(tdims)?;
    let sdims = input.style.dims();
    input.guide_hat.ensure_dims(sdims)?;
    input.guide_hat.ensure_non_uniform()?;
    if let Some(c) = input.context {
        c.fixed.ensure_dims(tdims)?;
        c.values.pixels().ensure_dims(tdims)?;
    }
    let top = match cfg.pyramid_levels {
        Some(l) => l,
        None => auto_levels(tdims, cfg.patch).min(auto_levels(sdims, cfg.patch)),
    };

    // An empty sketch has no strokes; borrow the guidance scale.
    let r_guide = stroke_radius(input.guide_hat)?;
    let r_text = stroke_radius(input.text_hat).unwrap_or(r_guide);
    let sigma = match cfg.sigma1 {
        Some(s) => s,
        None => stroke_radius(input.text).unwrap_or(r_text),
    };
    let sal = match input.saliency {
        Some(s) => {
            s.ensure_dims(sdims)?;
            s.clone()
        }
        None => saliency(input.style),
    };

    let text = build_pyramid(input.text, top)?;
    let text_hat = build_pyramid(input.text_hat, top)?;
    let guide_hat = build_pyramid(input.guide_hat, top)?;
    let sal = build_pyramid(&sal, top)?;
    let style = build_pyramid(&input.style.to_lab(), top)?;
    let usable = match input.source_usable {
        Some(m) => {
            m.ensure_dims(sdims)?;
            Some(usable_pyramid(m, top)?)
        }
        None => None,
    };
    let context = match input.context {
        Some(c) => Some((build_pyramid(&c.fixed, top)?, build_pyramid(&c.values.to_lab(), top)?)),
        None => None,
    };
    // Finest level pins exactly the requested pixels.
    let context_fixed = |l: usize| -> Option<(BinaryMask, RasterImage)> {
        let (f, v) = context.as_ref()?;
        let fixed = if l == 0 { input.context.unwrap().fixed.clone() } else { f.level(l).clone() };
        Some((fixed, v.level(l).clone()))
    };

    let weights = cfg.weights();
    let mut records = Vec::new();
    let mut field: Option<NNField> = None;
    let mut syn_final: Option<Synthesis> = None;
    for l in (0..=top).rev() {
        let scale = (1u64 << l) as f64;
        let pack = GuidancePack::new(
            text.level(l),
            text_hat.level(l),
            guide_hat.level(l),
            sal.level(l),
            ((r_text / scale).max(0.5), (r_guide / scale).max(0.5)),
            (sigma / scale).max(0.5),
        )?;
        let (tw, th) = text.level(l).dims();
        let blank = RasterImage::filled(tw, th, [0.5; 3], ColorSpace::Lab);
        let mut syn = Synthesis::new(
            &blank,
            style.level(l),
            Some(pack),
            weights,
            cfg.patch,
            usable.as_ref().map(|u| &u[l]),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let ctx = context_fixed(l);
        let mut f = match &field {
            None => syn.random_field(&mut rng),
            Some(coarse) => syn.upsample_field(coarse, &mut rng),
        };
        syn.vote(&f);
        if let Some((fixed, values)) = &ctx {
            syn.overwrite(fixed, values);
        }
        syn.refresh(&mut f);
        if trace {
            records.push(record(l, 0, Stage::Init, &syn, &f));
        }
        for it in 0..cfg.em_iters {
            pm_match(&mut f, &syn, cfg.pm_iters, &mut rng);
            if trace {
                records.push(record(l, it, Stage::Match, &syn, &f));
            }
            syn.vote(&f);
            if let Some((fixed, values)) = &ctx {
                syn.overwrite(fixed, values);
            }
            syn.refresh(&mut f);
            if trace {
                records.push(record(l, it, Stage::Vote, &syn, &f));
            }
        }
        field = Some(f);
        syn_final = Some(syn);
    }
    let syn = syn_final.expect("at least one level");
    let mut image = syn.target_image().to_srgb();
    if let Some(c) = input.context {
        for (i, &f) in c.fixed.as_slice().iter().enumerate() {
            if f {
                image.pixels_mut().as_mut_slice()[i] = c.values.pixels().as_slice()[i];
            }
        }
    }
    Ok(StylizeOutput {
        image,
        field: field.expect("at least one level"),
        trace: records,
        levels: top + 1,
    })
}

/// Normalized usage of source centre `q`.
pub fn energy_repetitiveness(q: (usize, usize), field: &NNField) -> f64 {
    field.usage(q) as f64 / field.n_patches() as f64
}
