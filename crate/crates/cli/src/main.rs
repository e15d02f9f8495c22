//! `embrng`: simulate entropy sources, extract seeds, run the generator,
//! estimate min-entropy and run statistical batches.
//!
//! Exit status: 0 success, 1 statistical failure, 2 usage or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "embrng",
    version,
    about = "Embedded Fortuna-style PRNG toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 64-byte seed from a 10240-byte SRAM power-on image.
    SeedExtract {
        image: PathBuf,
        /// Write the raw seed here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Boot the generator and emit pseudo-random bytes.
    Generate {
        /// Number of bytes to produce.
        #[arg(short = 'n', long, value_parser = clap::value_parser!(u64).range(1..))]
        bytes: u64,
        #[command(flatten)]
        seed: SeedSource,
        #[command(flatten)]
        sim: SimArgs,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a simulated sample stream plus a `.json` metadata sidecar.
    Simulate {
        source: Source,
        /// Samples to draw (power-on images for `sram`).
        #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the four min-entropy estimators on a raw sample file.
    Estimate {
        input: PathBuf,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Run the statistical test batch on bit files or generated streams.
    Sts {
        /// Bit files, packed or ASCII '0'/'1'.
        files: Vec<PathBuf>,
        /// Instead of files, generate this many streams from simulated boots.
        #[arg(long, conflicts_with = "files")]
        generate: Option<usize>,
        /// Bits per generated stream.
        #[arg(long, default_value_t = 1_000_000)]
        bits: usize,
        #[arg(long, value_enum, default_value_t = Format::Auto)]
        format: Format,
        #[arg(long, default_value_t = embrng::sts::DEFAULT_BLOCK_LEN)]
        block_len: usize,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Feed both runtime sources into the pools and report reseed behaviour.
    Harvest {
        /// Simulated seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Pool-0 events required before a reseed.
        #[arg(long, default_value_t = embrng::accumulator::DEFAULT_RESEED_THRESHOLD)]
        threshold: u64,
        /// Minimum simulated seconds between reseeds.
        #[arg(long, default_value_t = 0.0)]
        min_interval: f64,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Fit source noise parameters to their min-entropy targets.
    Calibrate {
        #[arg(long, value_enum, default_value_t = CalibrateTarget::All)]
        source: CalibrateTarget,
        /// Samples per evaluation for vlo and temp.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// SRAM boot, runtime harvest, generation and the statistical batch.
    Pipeline {
        #[arg(long, default_value_t = 100)]
        streams: usize,
        #[arg(long, default_value_t = 1_000_000)]
        bits: usize,
        /// Simulated harvest before each stream is drawn.
        #[arg(long, default_value_t = 0.1)]
        harvest_seconds: f64,
        #[arg(long, default_value_t = embrng::sts::DEFAULT_BLOCK_LEN)]
        block_len: usize,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct SeedSource {
    /// Raw 64-byte seed file.
    #[arg(long)]
    seed_file: Option<PathBuf>,
    /// SRAM image to extract the seed from.
    #[arg(long)]
    image: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Source model configuration (JSON); missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation noise seed, overriding the configuration.
    #[arg(long, conflicts_with = "os_noise")]
    noise_seed: Option<u64>,
    /// Draw the simulation noise seed from the operating system.
    #[arg(long)]
    os_noise: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Print a text table instead of JSON.
    #[arg(long)]
    table: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Vlo,
    Temp,
    Sram,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CalibrateTarget {
    Vlo,
    Temp,
    Sram,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Auto,
    Packed,
    Ascii,
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    StatisticalFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::StatisticalFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
