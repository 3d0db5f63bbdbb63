//! `mpm` — design and verification runs for modal-phase-matched dual-layer
//! lithium-niobate waveguides: mode solving, phase-matching searches, overlap
//! and conversion-efficiency evaluation, photon-pair simulation and time-tag
//! analysis.

mod commands;
mod config;
mod manifest;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

#[derive(Parser)]
#[command(name = "mpm", version, about, long_about = None)]
struct Cli {
    /// TOML run configuration; defaults to the fabricated design point.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Materials TOML overriding/extending the built-in dispersion library.
    #[arg(long, global = true)]
    materials: Option<PathBuf>,

    /// Output directory (overrides [io].out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides [spdc].rng_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Grid spacing in nm (overrides [solver].spacing_nm; max 25).
    #[arg(long, global = true)]
    spacing: Option<f64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print solver diagnostics (iterations, residuals, timings).
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the refractive-index library n(λ) as CSV.
    Materials,
    /// Solve guided modes of the configured cross-section (CSV + field maps).
    Modes {
        /// Wavelength in µm (default: [sweep].signal_wavelength_um).
        #[arg(long)]
        wavelength: Option<f64>,
        /// Number of modes to report.
        #[arg(long)]
        count: Option<usize>,
        /// Also export each mode's field as a CSV matrix.
        #[arg(long)]
        fields: bool,
    },
    /// Sweep the (w, h1) effective-index landscapes of TE00@λs and TE01@λs/2.
    PmSweep,
    /// Pump wavelength satisfying modal phase matching vs top width.
    PmCurve,
    /// Modal overlap factor ζ (dual and single layer), enhancement and
    /// efficiency predictions at the configured geometry.
    Overlap,
    /// Convert measured SHG powers (CSV: lambda_fh_um,p_fh_w,p_sh_w) to
    /// normalized efficiency in %/W/cm².
    Shg {
        /// Input CSV path.
        #[arg(long)]
        input: PathBuf,
        /// SH-path transmissivity (0..1].
        #[arg(long, default_value_t = mpm_core::nonlinear::T_SH_DEFAULT)]
        t_sh: f64,
        /// FH-path transmissivity (0..1].
        #[arg(long, default_value_t = mpm_core::nonlinear::T_FH_DEFAULT)]
        t_fh: f64,
        /// Waveguide length in cm.
        #[arg(long, default_value_t = mpm_core::nonlinear::LENGTH_CM_DEFAULT)]
        length_cm: f64,
        /// Apply a propagation-loss effective-length correction, dB/cm at the
        /// FH wavelength (replaces L by (1−10^(−αL/10))/(α·ln10/10)).
        #[arg(long)]
        loss_db_per_cm: Option<f64>,
    },
    /// Simulate the photon-pair source and write a binary time-tag file.
    SpdcSim {
        /// Also write the CSV form of the stream.
        #[arg(long)]
        csv: bool,
    },
    /// Analyze a time-tag file (binary .ttag or CSV): singles, coincidences,
    /// PGR, CAR and heralded g²(0).
    Analyze {
        /// Input time-tag file.
        #[arg(long)]
        input: PathBuf,
        /// Histogram span in ps (default: [spdc].histogram_span_ps).
        #[arg(long)]
        span_ps: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            let record = serde_json::json!({
                "error": { "kind": kind, "message": format!("{err:#}") }
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if let Some(core) = err.downcast_ref::<mpm_core::Error>() {
        return match core {
            mpm_core::Error::Io(_) => ("io", EXIT_IO),
            _ => ("domain", EXIT_DOMAIN),
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return ("io", EXIT_IO);
    }
    ("config", EXIT_CONFIG)
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        config.io.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.spdc.rng_seed = seed;
    }
    if let Some(spacing) = cli.spacing {
        config.solver.spacing_nm = spacing;
    }
    let library = match &cli.materials {
        None => mpm_core::MaterialLibrary::builtin(),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            mpm_core::MaterialLibrary::from_toml(&text).map_err(anyhow::Error::from)?
        }
    };
    std::fs::create_dir_all(&config.io.out_dir)?;

    let ctx = commands::Context {
        config,
        library,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Materials => commands::materials(&ctx),
        Command::Modes {
            wavelength,
            count,
            fields,
        } => commands::modes(&ctx, *wavelength, *count, *fields),
        Command::PmSweep => commands::pm_sweep(&ctx),
        Command::PmCurve => commands::pm_curve(&ctx),
        Command::Overlap => commands::overlap(&ctx),
        Command::Shg {
            input,
            t_sh,
            t_fh,
            length_cm,
            loss_db_per_cm,
        } => commands::shg(&ctx, input, *t_sh, *t_fh, *length_cm, *loss_db_per_cm),
        Command::SpdcSim { csv } => commands::spdc_sim(&ctx, *csv),
        Command::Analyze { input, span_ps } => commands::analyze(&ctx, input, *span_ps),
    }
}
