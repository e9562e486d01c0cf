//! Full pipeline: stylize the text with the (recoloured) style and embed it
//! into the background under a context-frame constraint. Also drives
//! structure-guided inpainting.

use std::time::Instant;

use serde::Serialize;

use crate::color::transfer_colors;
use crate::error::{Error, Result};
use crate::guidance::{extract_guidance, GuidanceConfig};
use crate::layout::{estimate_position, refine_multishape, shape_boxes, LayoutConfig, LayoutPlacement};
use crate::raster::{BinaryMask, Grid, RasterImage, Resample, ResampleMethod};
use crate::structure::{backward_transfer, forward_transfer, StructureConfig};
use crate::texture::{stylize, ContextFrame, StylizeInput, TextureConfig};

/// Width of the context frame around the synthesized region.
pub const DEFAULT_MARGIN: usize = 32;
/// Largest share of the image an inpainting region may cover.
pub const MAX_INPAINT_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, Default)]
pub struct PipelineConfig {
    pub guidance: GuidanceConfig,
    pub structure: StructureConfig,
    pub texture: TextureConfig,
    pub layout: LayoutConfig,
    pub embed: EmbedConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedConfig {
    pub margin: usize,
    /// Recolour the style toward the background before anything else.
    pub recolor: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            margin: DEFAULT_MARGIN,
            recolor: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.guidance.validate()?;
        self.structure.validate()?;
        self.texture.validate()?;
        self.layout.validate()
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimingReport {
    pub guidance: f64,
    pub position: f64,
    pub color: f64,
    pub structure: f64,
    pub texture: f64,
    pub total: f64,
    pub megapixels: ImageSizes,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ImageSizes {
    pub text: f64,
    pub style: f64,
    pub background: f64,
}

impl TimingReport {
    pub fn stage_sum(&self) -> f64 {
        self.guidance + self.position + self.color + self.structure + self.texture
    }
}

fn mp(dims: (usize, usize)) -> f64 {
    (dims.0 * dims.1) as f64 / 1e6
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *slot += t.elapsed().as_secs_f64();
    out
}

#[derive(Clone, Debug)]
pub struct Composition {
    pub image: RasterImage,
    pub placement: LayoutPlacement,
    pub timing: TimingReport,
    /// Recoloured style.
    pub style: RasterImage,
    pub guidance: BinaryMask,
    /// Text, deformed text and deformed guidance on the synthesis canvas.
    pub text_canvas: BinaryMask,
    pub text_hat: BinaryMask,
    pub guide_hat: BinaryMask,
    /// Synthesis canvas output before pasting.
    pub canvas: RasterImage,
}

/// Where the synthesis canvas sits in the background.
#[derive(Clone, Debug)]
struct Canvas {
    width: usize,
    height: usize,
    /// Canvas pixels that are synthesized and pasted back.
    inner: BinaryMask,
    /// Canvas pixels pinned to background values.
    fixed: BinaryMask,
    values: RasterImage,
    text: BinaryMask,
    kind: CanvasKind,
}

#[derive(Clone, Debug)]
enum CanvasKind {
    /// Integer offset of the canvas inside the background.
    Axis { x0: usize, y0: usize },
    /// Rotated frame: canvas pixel `(u, v)` sits at the placement's
    /// rectangle-local pixel `(u - margin, v - margin)`.
    Rotated { margin: usize },
}

fn scaled_text(text: &BinaryMask, w: usize, h: usize) -> Result<BinaryMask> {
    if text.dims() == (w, h) {
        return Ok(text.clone());
    }
    text.resize(w, h, ResampleMethod::Bicubic)
}

fn axis_canvas(bg: &RasterImage, text: &BinaryMask, p: &LayoutPlacement, margin: usize) -> Result<Canvas> {
    let (iw, ih) = bg.dims();
    let t = scaled_text(text, p.w, p.h)?;
    let (ox, oy) = p.origin();
    // Shapes moved by the multi-shape refinement may leave the rectangle,
    // so the inner region is the rectangle grown to hold them.
    let (labels, n) = t.connected_components();
    let rank = component_ranks(&labels, n);
    let offset_of = |label: u32| -> (i64, i64) {
        let id = rank[label as usize - 1];
        p.per_shape.iter().find(|o| o.id == id).map_or((0, 0), |o| (o.dx, o.dy))
    };
    let mut placed: Vec<(i64, i64)> = Vec::new();
    for y in 0..t.height() {
        for x in 0..t.width() {
            if *t.get(x, y) {
                let (dx, dy) = offset_of(*labels.get(x, y));
                placed.push((ox as i64 + x as i64 + dx, oy as i64 + y as i64 + dy));
            }
        }
    }
    let mut ix0 = ox as i64;
    let mut iy0 = oy as i64;
    let mut ix1 = (ox + p.w) as i64;
    let mut iy1 = (oy + p.h) as i64;
    for &(x, y) in &placed {
        ix0 = ix0.min(x);
        iy0 = iy0.min(y);
        ix1 = ix1.max(x + 1);
        iy1 = iy1.max(y + 1);
    }
    let ix0 = ix0.max(0) as usize;
    let iy0 = iy0.max(0) as usize;
    let ix1 = (ix1 as usize).min(iw);
    let iy1 = (iy1 as usize).min(ih);
    let x0 = ix0.saturating_sub(margin);
    let y0 = iy0.saturating_sub(margin);
    let x1 = (ix1 + margin).min(iw);
    let y1 = (iy1 + margin).min(ih);
    let (cw, ch) = (x1 - x0, y1 - y0);
    let inner = Grid::from_fn(cw, ch, |x, y| {
        let (gx, gy) = (x + x0, y + y0);
        gx >= ix0 && gx < ix1 && gy >= iy0 && gy < iy1
    });
    let mut tc = BinaryMask::filled(cw, ch, false);
    for &(x, y) in &placed {
        if x >= x0 as i64 && y >= y0 as i64 && (x as usize) < x1 && (y as usize) < y1 {
            tc.set(x as usize - x0, y as usize - y0, true);
        }
    }
    Ok(Canvas {
        width: cw,
        height: ch,
        fixed: inner.complement(),
        inner,
        values: bg.crop(x0, y0, cw, ch),
        text: tc,
        kind: CanvasKind::Axis { x0, y0 },
    })
}

/// Rank of each component under the ordering used by `shape_boxes`
/// (bounding-box left edge, then top edge).
fn component_ranks(labels: &Grid<u32>, n: usize) -> Vec<usize> {
    let mut first = vec![(usize::MAX, usize::MAX); n];
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let l = *labels.get(x, y) as usize;
            if l > 0 {
                let f = &mut first[l - 1];
                f.0 = f.0.min(x);
                f.1 = f.1.min(y);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| first[i]);
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

fn rotated_canvas(bg: &RasterImage, text: &BinaryMask, p: &LayoutPlacement, margin: usize) -> Result<Canvas> {
    let t = scaled_text(text, p.w, p.h)?;
    let (cw, ch) = (p.w + 2 * margin, p.h + 2 * margin);
    let (iw, ih) = bg.dims();
    let inner = Grid::from_fn(cw, ch, |x, y| x >= margin && x < margin + p.w && y >= margin && y < margin + p.h);
    let tc = Grid::from_fn(cw, ch, |x, y| *inner.get(x, y) && *t.get(x - margin, y - margin));
    let channels: Vec<_> = (0..3).map(|c| bg.channel(c)).collect();
    let values = RasterImage::from_fn(cw, ch, bg.space(), |u, v| {
        let (x, y) = p.map_point(u as f64 - margin as f64, v as f64 - margin as f64);
        let (x, y) = (x.clamp(0.0, iw as f64 - 1.0), y.clamp(0.0, ih as f64 - 1.0));
        [0, 1, 2].map(|c| channels[c].sample_bilinear(x, y))
    });
    Ok(Canvas {
        width: cw,
        height: ch,
        fixed: inner.complement(),
        inner,
        values,
        text: tc,
        kind: CanvasKind::Rotated { margin },
    })
}

/// Writes the synthesized inner region back into a copy of `bg`. Pixels of
/// `bg` outside the inner region are never written.
fn paste(bg: &RasterImage, canvas: &Canvas, synth: &RasterImage, p: &LayoutPlacement) -> RasterImage {
    let mut out = bg.clone();
    match canvas.kind {
        CanvasKind::Axis { x0, y0 } => {
            for y in 0..canvas.height {
                for x in 0..canvas.width {
                    if *canvas.inner.get(x, y) {
                        out.set(x0 + x, y0 + y, synth.get(x, y));
                    }
                }
            }
        }
        CanvasKind::Rotated { margin } => {
            let channels: Vec<_> = (0..3).map(|c| synth.channel(c)).collect();
            let (cx, cy) = p.center();
            let (s, c) = p.rotation_rad.sin_cos();
            let (hw, hh) = ((p.w as f64 - 1.0) / 2.0, (p.h as f64 - 1.0) / 2.0);
            for y in 0..bg.height() {
                for x in 0..bg.width() {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    // Inverse rotation into rectangle-local coordinates.
                    let u = c * dx + s * dy + hw;
                    let v = -s * dx + c * dy + hh;
                    if u < -0.5 || v < -0.5 || u > p.w as f64 - 0.5 || v > p.h as f64 - 0.5 {
                        continue;
                    }
                    let (cu, cv) = (
                        (u + margin as f64).clamp(0.0, canvas.width as f64 - 1.0),
                        (v + margin as f64).clamp(0.0, canvas.height as f64 - 1.0),
                    );
                    out.set(x, y, [0, 1, 2].map(|k| channels[k].sample_bilinear(cu, cv)));
                }
            }
        }
    }
    out
}

/// Forward then backward structure transfer. A transfer that collapses to a
/// uniform mask (possible on tiny inputs) falls back to its undeformed input.
pub fn transfer_structure(
    text: &BinaryMask,
    guidance: &BinaryMask,
    cfg: &StructureConfig,
) -> Result<(BinaryMask, BinaryMask)> {
    let t_hat = forward_transfer(text, guidance, cfg)?;
    let t_hat = if t_hat.uniform_value().is_some() { text.clone() } else { t_hat };
    let s_hat = backward_transfer(guidance, &t_hat, cfg)?;
    let s_hat = if s_hat.uniform_value().is_some() { guidance.clone() } else { s_hat };
    Ok((t_hat, s_hat))
}

/// Position search followed, when enabled and unrotated, by the per-shape
/// refinement. `style` should already be recoloured.
pub fn choose_placement(
    text: &BinaryMask,
    style: &RasterImage,
    background: &RasterImage,
    cfg: &LayoutConfig,
) -> Result<LayoutPlacement> {
    let (p, maps) = estimate_position(background, style, text.dims(), cfg)?;
    if cfg.enable_multishape && p.rotation_rad == 0.0 {
        let u = maps.combined(cfg.lambda4);
        Ok(refine_multishape(&p, &shape_boxes(&scaled_text(text, p.w, p.h)?), &u, cfg)?.placement)
    } else {
        Ok(p)
    }
}

/// Stylizes `text` with `style` and embeds it into `background`.
/// `placement` skips the position search when given.
pub fn compose(
    text: &BinaryMask,
    style: &RasterImage,
    background: &RasterImage,
    placement: Option<&LayoutPlacement>,
    cfg: &PipelineConfig,
) -> Result<Composition> {
    cfg.validate()?;
    text.ensure_non_uniform()?;
    let start = Instant::now();
    let mut timing = TimingReport {
        megapixels: ImageSizes {
            text: mp(text.dims()),
            style: mp(style.dims()),
            background: mp(background.dims()),
        },
        ..TimingReport::default()
    };
    let style = style.to_srgb();
    let background = background.to_srgb();

    let style = timed(&mut timing.color, || {
        if cfg.embed.recolor {
            transfer_colors(&style, &background)
        } else {
            style.clone()
        }
    });
    let guidance = timed(&mut timing.guidance, || extract_guidance(&style, &cfg.guidance))?;

    let placement = timed(&mut timing.position, || -> Result<LayoutPlacement> {
        if let Some(p) = placement {
            return Ok(p.clone());
        }
        choose_placement(text, &style, &background, &cfg.layout)
    })?;

    let canvas = if placement.rotation_rad == 0.0 {
        axis_canvas(&background, text, &placement, cfg.embed.margin)?
    } else {
        rotated_canvas(&background, text, &placement, cfg.embed.margin)?
    };
    if canvas.text.uniform_value().is_some() {
        return Err(Error::NoValidPlacement);
    }

    let (text_hat, guide_hat) =
        timed(&mut timing.structure, || transfer_structure(&canvas.text, &guidance, &cfg.structure))?;

    let synth = timed(&mut timing.texture, || -> Result<RasterImage> {
        let ctx = ContextFrame {
            fixed: canvas.fixed.clone(),
            values: canvas.values.clone(),
        };
        let has_frame = canvas.fixed.count_ones() > 0;
        let input = StylizeInput {
            text: &canvas.text,
            text_hat: &text_hat,
            guide_hat: &guide_hat,
            style: &style,
            context: has_frame.then_some(&ctx),
            source_usable: None,
            saliency: None,
        };
        stylize(&input, &cfg.texture)
    })?;

    let image = paste(&background, &canvas, &synth, &placement);
    timing.total = start.elapsed().as_secs_f64();
    Ok(Composition {
        image,
        placement,
        timing,
        style,
        guidance,
        text_canvas: canvas.text,
        text_hat,
        guide_hat,
        canvas: synth,
    })
}

/// Fills `region` of `image` from the rest of the image, optionally steered
/// by a `sketch` (image-sized) that marks where foreground texture goes.
pub fn inpaint(image: &RasterImage, region: &BinaryMask, sketch: Option<&BinaryMask>, cfg: &PipelineConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let image = image.to_srgb();
    let dims = image.dims();
    region.ensure_dims(dims)?;
    if let Some(s) = sketch {
        s.ensure_dims(dims)?;
    }
    let n = region.count_ones();
    let fraction = n as f64 / (dims.0 * dims.1) as f64;
    if fraction > MAX_INPAINT_FRACTION {
        return Err(Error::RegionTooLarge { fraction });
    }
    if n == 0 {
        return Ok(image);
    }
    let (bx0, by0, bx1, by1) = region.bounding_box().expect("nonempty region");
    let m = cfg.embed.margin.max(cfg.texture.patch);
    let x0 = bx0.saturating_sub(m);
    let y0 = by0.saturating_sub(m);
    let x1 = (bx1 + 1 + m).min(dims.0);
    let y1 = (by1 + 1 + m).min(dims.1);
    let (cw, ch) = (x1 - x0, y1 - y0);
    let unknown = region.crop(x0, y0, cw, ch);
    let text = match sketch {
        Some(s) => s.crop(x0, y0, cw, ch),
        None => BinaryMask::filled(cw, ch, false),
    };
    // Without a sketch, or on a featureless image, there is nothing for the
    // guidance channel to steer. Marking only the unknown region as
    // foreground keeps the mask valid while every usable source patch stays
    // background, and the distribution term is switched off.
    let mut texture = cfg.texture.clone();
    let extracted = match sketch {
        Some(_) => match extract_guidance(&image, &cfg.guidance) {
            Ok(g) if g.uniform_value().is_none() => Some(g),
            Ok(_) | Err(Error::DegenerateFeatures) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let guidance = extracted.unwrap_or_else(|| {
        texture.lambda1 = 0.0;
        region.clone()
    });
    let ctx = ContextFrame {
        fixed: unknown.complement(),
        values: image.crop(x0, y0, cw, ch),
    };
    let usable = region.complement();
    let input = StylizeInput {
        text: &text,
        text_hat: &text,
        guide_hat: &guidance,
        style: &image,
        context: Some(&ctx),
        source_usable: Some(&usable),
        saliency: None,
    };
    let synth = stylize(&input, &texture)?;
    let mut out = image.clone();
    for y in 0..ch {
        for x in 0..cw {
            if *unknown.get(x, y) {
                out.set(x0 + x, y0 + y, synth.get(x, y));
            }
        }
    }
    Ok(out)
}
