//! `lumafield` command-line front end.

mod commands;
mod config;
mod fail;
mod scene;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{extract_overrides, RunConfig};
use fail::Failure;

/// Physically-based neural shading under HDR environment light.
///
/// Every configuration key can be set with `--section.key value` (or the bare
/// key name when it is unique), e.g. `--density.delta 2.0` or `--shadows off`.
#[derive(Parser, Debug)]
#[command(name = "lumafield", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the asset with a checkpoint or a fixed material.
    Render {
        /// Bypass the networks: `gamma,eta` or `gamma,eta_r,eta_g,eta_b`.
        #[arg(long)]
        fixed_material: Option<String>,
        /// Also write the per-term layer images.
        #[arg(long)]
        layers: bool,
    },
    /// Render under a substituted HDRI.
    Relight {
        hdri: PathBuf,
        #[arg(long)]
        fixed_material: Option<String>,
    },
    /// Fit both networks to a dataset manifest.
    Train {
        /// Continue from the checkpoint in `paths.checkpoint`.
        #[arg(long)]
        resume: bool,
    },
    /// Synthesize an analytic sphere dataset.
    GenDataset {
        /// Scene description (TOML); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Write a one-light-at-a-time environment map.
    GenOlat {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 1.0, 0.0])]
        center: Vec<f64>,
        /// Angular radius in degrees.
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0])]
        radiance: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 150)]
        cols: usize,
    },
    /// Visualize the light field network as a grid of shaded probe balls.
    ProbeField {
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 4, 1])]
        grid: Vec<usize>,
        /// Tile size in pixels.
        #[arg(long, default_value_t = 32)]
        tile: usize,
    },
    /// Run one of the ablation studies.
    Ablate {
        mode: AblateMode,
        #[arg(long)]
        fixed_material: Option<String>,
    },
    /// Median render time over repeated runs at several resolutions.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256, 512])]
        resolutions: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        fixed_material: Option<String>,
    },
    /// PSNR and SSIM between two images (.hdr linear or .png display-encoded).
    Metrics { rendered: PathBuf, reference: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AblateMode {
    Density,
    Sampling,
    MaterialLayers,
}

const RESERVED: &[&str] = &[
    "config",
    "fixed-material",
    "layers",
    "resume",
    "spec",
    "center",
    "radius",
    "radiance",
    "rows",
    "cols",
    "grid",
    "tile",
    "resolutions",
    "repeats",
    "help",
    "version",
];

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("LUMAFIELD_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Failure::config(format!("LUMAFIELD_THREADS='{v}' is not a count")))?;
    if n == 0 {
        return Err(Failure::config("LUMAFIELD_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::config(e.to_string()))
}

fn run() -> Result<(), Failure> {
    let args: Vec<String> = std::env::args().collect();
    let args: Vec<String> = args
        .into_iter()
        .map(|a| if a == "-o" { "--paths.output".to_string() } else { a })
        .collect();
    let (rest, overrides) = extract_overrides(args, RESERVED)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    configure_threads()?;
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Render { fixed_material, layers } => commands::render(&cfg, fixed_material.as_deref(), layers, None),
        Command::Relight { hdri, fixed_material } => commands::render(&cfg, fixed_material.as_deref(), false, Some(&hdri)),
        Command::Train { resume } => commands::train(&cfg, resume),
        Command::GenDataset { spec } => commands::gen_dataset(&cfg, spec.as_deref()),
        Command::GenOlat { center, radius, radiance, rows, cols } => {
            commands::gen_olat(&cfg, &center, radius, &radiance, rows, cols)
        }
        Command::ProbeField { grid, tile } => commands::probe_field(&cfg, &grid, tile),
        Command::Ablate { mode, fixed_material } => commands::ablate(&cfg, mode, fixed_material.as_deref()),
        Command::Bench { resolutions, repeats, fixed_material } => {
            commands::bench(&cfg, &resolutions, repeats, fixed_material.as_deref())
        }
        Command::Metrics { rendered, reference } => commands::metrics(&rendered, &reference),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lumafield: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
