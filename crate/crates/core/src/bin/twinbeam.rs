use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use twinbeam::config::RunConfig;
use twinbeam::run::{run, Command, Format, RunOptions};

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Four-wave-mixing twin-beam simulator"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output_dir in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides rng_seed in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate the seeded pair through the channel and detect it.
    Simulate,
    /// Gains, noise and optimal attenuation across two-photon detuning.
    SweepDetuning,
    /// Intensity and fork-interferogram images of the three beams.
    RenderBeams {
        /// Seed topological charge (overrides image.l).
        #[arg(long, allow_hyphen_values = true)]
        l: Option<i32>,
    },
    /// Fit channel parameters to the configured targets.
    Fit,
    /// Optimal probe attenuation for the configured channel.
    OptimizeAttenuation,
    /// Write the built-in scenario files.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("twinbeam: error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::SweepDetuning => Command::SweepDetuning,
        Cmd::RenderBeams { l } => {
            if let Some(l) = l {
                cfg.image.l = l;
            }
            Command::RenderBeams
        }
        Cmd::Fit => Command::Fit,
        Cmd::OptimizeAttenuation => Command::OptimizeAttenuation,
        Cmd::Presets => Command::Presets,
    };
    if cli.threads == Some(0) {
        return Err("--threads must be at least 1".into());
    }
    let out_dir = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let opts = RunOptions {
        out_dir,
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        threads: cli.threads,
    };
    let report = run(command, &cfg, &opts).map_err(|e| e.to_string())?;
    for w in &report.warnings {
        eprintln!("twinbeam: warning: {w}");
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            eprintln!("twinbeam: error: {f}");
        }
        Ok(ExitCode::from(2))
    }
}
