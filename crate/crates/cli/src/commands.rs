use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glyphforge::color::{transfer_colors_detailed, ColorCategory};
use glyphforge::embedding::{choose_placement, compose, inpaint, transfer_structure, ImageSizes, TimingReport};
use glyphforge::fixtures::make_fixtures;
use glyphforge::guidance::{extract_guidance, extract_guidance_detailed, superpixel_boundaries};
use glyphforge::layout::{CostMaps, LayoutPlacement};
use glyphforge::raster::io::{load_mask, load_rgb, save_field_png, save_mask, save_rgb};
use glyphforge::raster::{BinaryMask, RasterImage};
use glyphforge::structure::{backward_transfer, forward_transfer};
use glyphforge::texture::{stylize_traced, StylizeInput};
use serde_json::json;

use crate::config::Settings;
use crate::{Cli, CliError, ColorDirection, Command, Direction};

fn require(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("input file not found: {}", path.display())))
    }
}

fn read_rgb(path: &Path) -> Result<RasterImage, CliError> {
    require(path)?;
    load_rgb(path).map_err(|e| CliError::Validation(e.to_string()))
}

fn read_mask(path: &Path) -> Result<BinaryMask, CliError> {
    require(path)?;
    load_mask(path).map_err(|e| CliError::Validation(e.to_string()))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))
}

struct Debug(Option<PathBuf>);

impl Debug {
    fn new(dir: &Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| runtime(format!("{}: {e}", d.display())))?;
        }
        Ok(Debug(dir.clone()))
    }

    fn on(&self) -> bool {
        self.0.is_some()
    }

    fn mask(&self, name: &str, m: &BinaryMask) -> Result<(), CliError> {
        match &self.0 {
            Some(d) => save_mask(m, d.join(name)).map_err(runtime),
            None => Ok(()),
        }
    }

    fn rgb(&self, name: &str, img: &RasterImage) -> Result<(), CliError> {
        match &self.0 {
            Some(d) => save_rgb(img, d.join(name)).map_err(runtime),
            None => Ok(()),
        }
    }

    fn field(&self, name: &str, f: &glyphforge::raster::ScalarField) -> Result<(), CliError> {
        match &self.0 {
            Some(d) => save_field_png(f, d.join(name)).map_err(runtime),
            None => Ok(()),
        }
    }

    fn json(&self, name: &str, v: &impl serde::Serialize) -> Result<(), CliError> {
        match &self.0 {
            Some(d) => write_json(&d.join(name), v),
            None => Ok(()),
        }
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

pub fn dispatch(cli: &Cli, s: &Settings) -> Result<(), CliError> {
    let start = Instant::now();
    let dbg = Debug::new(&cli.debug_dir)?;
    let cfg = &s.pipeline;
    let mut timing = TimingReport::default();
    match &cli.command {
        Command::Guidance { style, out } => {
            let style = read_rgb(style)?;
            timing.megapixels.style = mp(style.dims());
            let products = timed(&mut timing.guidance, || extract_guidance_detailed(&style, &cfg.guidance))?;
            save_mask(&products.guidance, out).map_err(runtime)?;
            dbg.rgb("smoothed.png", &products.smoothed)?;
            dbg.field("saliency.png", &products.saliency)?;
            dbg.mask("superpixels.png", &superpixel_boundaries(&products.superpixels))?;
        }
        Command::Structure { text, guidance, out, out_guidance, direction } => {
            let text = read_mask(text)?;
            let guidance = read_mask(guidance)?;
            timing.megapixels.text = mp(text.dims());
            timing.megapixels.style = mp(guidance.dims());
            if *direction == Direction::Both && out_guidance.is_none() {
                return Err(CliError::Validation("--direction both needs --out-guidance".into()));
            }
            match direction {
                Direction::Forward => {
                    let t_hat = timed(&mut timing.structure, || forward_transfer(&text, &guidance, &cfg.structure))?;
                    save_mask(&t_hat, out).map_err(runtime)?;
                }
                Direction::Backward => {
                    let s_hat = timed(&mut timing.structure, || backward_transfer(&guidance, &text, &cfg.structure))?;
                    save_mask(&s_hat, out).map_err(runtime)?;
                }
                Direction::Both => {
                    let (t_hat, s_hat) =
                        timed(&mut timing.structure, || transfer_structure(&text, &guidance, &cfg.structure))?;
                    save_mask(&t_hat, out).map_err(runtime)?;
                    save_mask(&s_hat, out_guidance.as_ref().expect("checked above")).map_err(runtime)?;
                }
            }
        }
        Command::Stylize { text, style, out, guidance, no_structure, dump_energy } => {
            let text = read_mask(text)?;
            let style = read_rgb(style)?;
            text.ensure_non_uniform()?;
            timing.megapixels.text = mp(text.dims());
            timing.megapixels.style = mp(style.dims());
            let guidance = match guidance {
                Some(p) => {
                    let g = read_mask(p)?;
                    g.ensure_dims(style.dims())?;
                    g
                }
                None => timed(&mut timing.guidance, || extract_guidance(&style, &cfg.guidance))?,
            };
            let (t_hat, s_hat) = if *no_structure {
                (text.clone(), guidance.clone())
            } else {
                timed(&mut timing.structure, || transfer_structure(&text, &guidance, &cfg.structure))?
            };
            let input = StylizeInput {
                text: &text,
                text_hat: &t_hat,
                guide_hat: &s_hat,
                style: &style,
                context: None,
                source_usable: None,
                saliency: None,
            };
            let result = timed(&mut timing.texture, || stylize_traced(&input, &cfg.texture, dump_energy.is_some()))?;
            save_rgb(&result.image, out).map_err(runtime)?;
            if let Some(path) = dump_energy {
                let mut w = csv::Writer::from_path(path).map_err(runtime)?;
                for r in &result.trace {
                    w.serialize(r).map_err(runtime)?;
                }
                w.flush().map_err(runtime)?;
            }
            dbg.mask("guidance.png", &guidance)?;
            dbg.mask("text_hat.png", &t_hat)?;
            dbg.mask("guide_hat.png", &s_hat)?;
        }
        Command::Recolor { style, background, out, direction } => {
            let mut style = read_rgb(style)?;
            let mut bg = read_rgb(background)?;
            if *direction == ColorDirection::BackgroundToStyle {
                std::mem::swap(&mut style, &mut bg);
            }
            timing.megapixels.style = mp(style.dims());
            timing.megapixels.background = mp(bg.dims());
            let t = timed(&mut timing.color, || transfer_colors_detailed(&style, &bg));
            save_rgb(&t.image, out).map_err(runtime)?;
            if dbg.on() {
                let cats: Vec<_> = ColorCategory::ALL
                    .iter()
                    .map(|&c| {
                        json!({
                            "category": c.name(),
                            "style_share": t.style_model.share(c),
                            "background_share": t.background_model.share(c),
                            "own_transform": t.maps[c.index()].is_some(),
                            "clamped": t.clamped[c.index()],
                        })
                    })
                    .collect();
                dbg.json("categories.json", &cats)?;
            }
        }
        Command::Layout { text, style, background, out, .. } => {
            let text = read_mask(text)?;
            let style = read_rgb(style)?;
            let bg = read_rgb(background)?;
            text.ensure_non_uniform()?;
            timing.megapixels.text = mp(text.dims());
            timing.megapixels.style = mp(style.dims());
            timing.megapixels.background = mp(bg.dims());
            let style = if cfg.embed.recolor {
                timed(&mut timing.color, || glyphforge::color::transfer_colors(&style, &bg))
            } else {
                style
            };
            let p = timed(&mut timing.position, || choose_placement(&text, &style, &bg, &cfg.layout))?;
            write_json(out, &p)?;
            if dbg.on() {
                let maps = CostMaps::compute(&bg, &style, &cfg.layout)?;
                dbg.field("cost_variance.png", &maps.variance)?;
                dbg.field("cost_saliency.png", &maps.saliency)?;
                dbg.field("cost_coherence.png", &maps.coherence)?;
                dbg.field("cost_aesthetics.png", &maps.aesthetics)?;
                dbg.field("cost_total.png", &maps.combined(cfg.layout.lambda4))?;
            }
        }
        Command::Compose { text, style, background, out, layout, .. } => {
            let text = read_mask(text)?;
            let style = read_rgb(style)?;
            let bg = read_rgb(background)?;
            let placement: Option<LayoutPlacement> = match layout {
                Some(p) => {
                    require(p)?;
                    let raw = fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                    Some(
                        serde_json::from_str(&raw)
                            .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                    )
                }
                None => None,
            };
            let c = compose(&text, &style, &bg, placement.as_ref(), cfg)?;
            save_rgb(&c.image, out).map_err(runtime)?;
            timing = c.timing.clone();
            dbg.rgb("style_recolored.png", &c.style)?;
            dbg.mask("guidance.png", &c.guidance)?;
            dbg.mask("text_canvas.png", &c.text_canvas)?;
            dbg.mask("text_hat.png", &c.text_hat)?;
            dbg.mask("guide_hat.png", &c.guide_hat)?;
            dbg.rgb("canvas.png", &c.canvas)?;
            dbg.json("layout.json", &c.placement)?;
        }
        Command::Inpaint { image, mask, sketch, out } => {
            let img = read_rgb(image)?;
            let region = read_mask(mask)?;
            let sketch = sketch.as_deref().map(read_mask).transpose()?;
            timing.megapixels = ImageSizes { text: 0.0, style: mp(img.dims()), background: mp(img.dims()) };
            let filled = timed(&mut timing.texture, || inpaint(&img, &region, sketch.as_ref(), cfg))?;
            save_rgb(&filled, out).map_err(runtime)?;
        }
        Command::Fixtures { out } => {
            let m = make_fixtures(out, cfg.texture.seed)?;
            println!("wrote {} fixtures to {}", m.entries.len(), out.display());
        }
    }
    if let Some(path) = &cli.timings {
        let measured = start.elapsed().as_secs_f64();
        timing.total = timing.total.max(measured).max(timing.stage_sum());
        write_json(path, &timing)?;
    }
    Ok(())
}
