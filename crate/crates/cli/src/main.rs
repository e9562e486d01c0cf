mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Settings;

pub const THREADS_ENV: &str = "GLYPHFORGE_THREADS";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<glyphforge::Error> for CliError {
    fn from(e: glyphforge::Error) -> Self {
        use glyphforge::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::DimensionMismatch { .. }
            | E::UniformMask { .. }
            | E::RegionTooLarge { .. }
            | E::EmptyForeground => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "glyphforge", version, about = "Texture stylization of text and shapes, and context-aware embedding")]
pub struct Cli {
    /// Plain-text file of key=value settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Setting override, repeatable; takes precedence over --config.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to GLYPHFORGE_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write per-stage wall-clock times as JSON.
    #[arg(long, value_name = "PATH", global = true)]
    timings: Option<PathBuf>,
    /// Directory for intermediate products.
    #[arg(long, value_name = "DIR", global = true)]
    debug_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct LayoutFlags {
    /// Search over scales.
    #[arg(long)]
    scale: bool,
    /// Search over rotations.
    #[arg(long)]
    rotation: bool,
    /// Refine each connected shape separately.
    #[arg(long)]
    multishape: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorDirection {
    /// Recolour the style toward the background.
    StyleToBackground,
    /// Recolour the background toward the style.
    BackgroundToStyle,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract the binary guidance map of a style image.
    Guidance {
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deform a text mask toward a guidance map, or the reverse.
    Structure {
        /// Text mask (forward, both) or deformed text mask (backward).
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        guidance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Deformed guidance output for `--direction both`.
        #[arg(long)]
        out_guidance: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Direction::Forward)]
        direction: Direction,
    },
    /// Render the text with the style's texture.
    Stylize {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Precomputed guidance map of the style.
        #[arg(long)]
        guidance: Option<PathBuf>,
        /// Skip structure transfer.
        #[arg(long)]
        no_structure: bool,
        /// Write the energy after every step as CSV.
        #[arg(long, value_name = "PATH")]
        dump_energy: Option<PathBuf>,
    },
    /// Move the style's colour statistics toward the background's.
    Recolor {
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which image's statistics are moved toward the other's.
        #[arg(long, value_enum, default_value_t = ColorDirection::StyleToBackground)]
        direction: ColorDirection,
    },
    /// Find where the text fits best in the background.
    Layout {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        background: PathBuf,
        /// Placement JSON.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: LayoutFlags,
        #[arg(long)]
        no_recolor: bool,
    },
    /// Full pipeline: stylize the text and embed it into the background.
    Compose {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use this placement JSON instead of searching.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[command(flatten)]
        flags: LayoutFlags,
        #[arg(long)]
        no_recolor: bool,
        /// Context frame width in pixels.
        #[arg(long)]
        margin: Option<usize>,
    },
    /// Fill a masked region from the rest of the image.
    Inpaint {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        sketch: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic test corpus with a checksummed manifest.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        s.apply("threads", &v)
            .map_err(|e| CliError::Validation(format!("{THREADS_ENV}: {}", e.message())))?;
    }
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    for kv in &cli.set {
        s.apply_line(kv, "--set")?;
    }
    if let Some(seed) = cli.seed {
        s.apply("seed", &seed.to_string())?;
    }
    if let Some(n) = cli.threads {
        s.apply("threads", &n.to_string())?;
    }
    match &cli.command {
        Command::Layout { flags, no_recolor, .. } => {
            apply_layout_flags(&mut s, flags);
            if *no_recolor {
                s.pipeline.embed.recolor = false;
            }
        }
        Command::Compose { flags, no_recolor, margin, .. } => {
            apply_layout_flags(&mut s, flags);
            if *no_recolor {
                s.pipeline.embed.recolor = false;
            }
            if let Some(m) = margin {
                s.pipeline.embed.margin = *m;
            }
        }
        _ => {}
    }
    s.validate()?;
    Ok(s)
}

fn apply_layout_flags(s: &mut Settings, f: &LayoutFlags) {
    let l = &mut s.pipeline.layout;
    l.enable_scale |= f.scale;
    l.enable_rotation |= f.rotation;
    l.enable_multishape |= f.multishape;
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let s = settings(cli)?;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    commands::dispatch(cli, &s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
