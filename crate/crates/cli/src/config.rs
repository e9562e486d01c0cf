//! `key=value` settings shared by the config file and `--set` flags.

use std::fs;
use std::path::Path;

use glyphforge::embedding::PipelineConfig;

use crate::CliError;

/// Every recognised key, for error messages and `--help`.
pub const KEYS: &[&str] = &[
    "seed",
    "threads",
    "guidance.smoothing_strength",
    "guidance.superpixel_cell",
    "guidance.kmeans_seed",
    "structure.levels",
    "structure.top_resolution",
    "structure.boundary_patch",
    "structure.lss_iterations",
    "structure.legibility_band",
    "texture.lambda1",
    "texture.lambda2",
    "texture.lambda3",
    "texture.sigma1",
    "texture.patch",
    "texture.pyramid_levels",
    "texture.em_iters",
    "texture.pm_iters",
    "texture.seed",
    "layout.lambda4",
    "layout.enable_scale",
    "layout.enable_rotation",
    "layout.enable_multishape",
    "layout.local_patch",
    "layout.coherence_patch",
    "layout.coherence_iters",
    "layout.shape_radius",
    "layout.max_passes",
    "layout.seed",
    "embed.margin",
    "embed.recolor",
];

#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub threads: Option<usize>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("invalid value for {key}: {value:?}")))
}

impl Settings {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let p = &mut self.pipeline;
        match key.trim() {
            "seed" => {
                let s: u64 = parse(key, value)?;
                p.guidance.kmeans_seed = s;
                p.texture.seed = s;
                p.layout.seed = s;
            }
            "threads" => {
                let n: usize = parse(key, value)?;
                if n == 0 {
                    return Err(CliError::Validation("threads must be >= 1".into()));
                }
                self.threads = Some(n);
            }
            "guidance.smoothing_strength" => p.guidance.smoothing_strength = parse(key, value)?,
            "guidance.superpixel_cell" => p.guidance.superpixel_cell = parse(key, value)?,
            "guidance.kmeans_seed" => p.guidance.kmeans_seed = parse(key, value)?,
            "structure.levels" => p.structure.levels = parse(key, value)?,
            "structure.top_resolution" => p.structure.top_resolution = parse(key, value)?,
            "structure.boundary_patch" => p.structure.boundary_patch = parse(key, value)?,
            "structure.lss_iterations" => p.structure.lss_iterations = parse(key, value)?,
            "structure.legibility_band" => p.structure.legibility_band = parse(key, value)?,
            "texture.lambda1" => p.texture.lambda1 = parse(key, value)?,
            "texture.lambda2" => p.texture.lambda2 = parse(key, value)?,
            "texture.lambda3" => p.texture.lambda3 = parse(key, value)?,
            "texture.sigma1" => p.texture.sigma1 = Some(parse(key, value)?),
            "texture.patch" => p.texture.patch = parse(key, value)?,
            "texture.pyramid_levels" => p.texture.pyramid_levels = Some(parse(key, value)?),
            "texture.em_iters" => p.texture.em_iters = parse(key, value)?,
            "texture.pm_iters" => p.texture.pm_iters = parse(key, value)?,
            "texture.seed" => p.texture.seed = parse(key, value)?,
            "layout.lambda4" => p.layout.lambda4 = parse(key, value)?,
            "layout.enable_scale" => p.layout.enable_scale = parse(key, value)?,
            "layout.enable_rotation" => p.layout.enable_rotation = parse(key, value)?,
            "layout.enable_multishape" => p.layout.enable_multishape = parse(key, value)?,
            "layout.local_patch" => p.layout.local_patch = parse(key, value)?,
            "layout.coherence_patch" => p.layout.coherence_patch = parse(key, value)?,
            "layout.coherence_iters" => p.layout.coherence_iters = parse(key, value)?,
            "layout.shape_radius" => p.layout.shape_radius = parse(key, value)?,
            "layout.max_passes" => p.layout.max_passes = parse(key, value)?,
            "layout.seed" => p.layout.seed = parse(key, value)?,
            "embed.margin" => p.embed.margin = parse(key, value)?,
            "embed.recolor" => p.embed.recolor = parse(key, value)?,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown config key {other:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies one `key=value` line. Blank lines and `#` comments are skipped.
    pub fn apply_line(&mut self, line: &str, origin: &str) -> Result<(), CliError> {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return Ok(());
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("{origin}: expected key=value, got {line:?}")))?;
        self.apply(k, v)
            .map_err(|e| CliError::Validation(format!("{origin}: {}", e.message())))
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            self.apply_line(line, &format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline.validate().map_err(|e| CliError::Validation(e.to_string()))
    }
}
