use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use embrng::accumulator::{AccumulatorConfig, PoolSet};
use embrng::calibration::{self, Fit};
use embrng::crc::{extract_seed, SramImage};
use embrng::entropy::full_report;
use embrng::pipeline::{boot, boot_outputs, run_pipeline, PipelineConfig};
use embrng::sources::{os_noise_seed, run_harvest, sram_stream, SourceConfig};
use embrng::sts::{self, BitFormat};
use embrng::{EntropyReport, GeneratorState, SampleStream, Seed, SourceKind, StreamMeta};

use crate::{CalibrateTarget, Command, Format, ReportArgs, SeedSource, SimArgs, Source, Status};

pub(crate) fn run(command: Command) -> Result<Status> {
    match command {
        Command::SeedExtract { image, out } => seed_extract(&image, out.as_deref()),
        Command::Generate {
            bytes,
            seed,
            sim,
            out,
        } => generate(bytes, &seed, &sim, out.as_deref()),
        Command::Simulate {
            source,
            count,
            sim,
            out,
        } => simulate(source, count, &sim, &out),
        Command::Estimate { input, output } => estimate(&input, &output),
        Command::Sts {
            files,
            generate,
            bits,
            format,
            block_len,
            sim,
            output,
        } => sts_batch(&files, generate, bits, format, block_len, &sim, &output),
        Command::Harvest {
            duration,
            threshold,
            min_interval,
            sim,
            output,
        } => harvest(duration, threshold, min_interval, &sim, &output),
        Command::Calibrate {
            source,
            samples,
            sim,
            output,
        } => calibrate(source, samples, &sim, &output),
        Command::Pipeline {
            streams,
            bits,
            harvest_seconds,
            block_len,
            sim,
            output,
        } => pipeline(streams, bits, harvest_seconds, block_len, &sim, &output),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn load_config(sim: &SimArgs) -> Result<SourceConfig> {
    let mut cfg: SourceConfig = match &sim.config {
        Some(p) => serde_json::from_slice(&read(p)?)
            .with_context(|| format!("parsing config {}", p.display()))?,
        None => SourceConfig::default(),
    };
    if let Some(s) = sim.noise_seed {
        cfg.noise_seed = s;
    } else if sim.os_noise {
        cfg.noise_seed = os_noise_seed();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Print the JSON report, or the table when asked, and save the JSON if requested.
fn emit<T: Serialize>(report: &T, table: impl FnOnce() -> String, args: &ReportArgs) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    if let Some(p) = &args.report {
        write(p, json.as_bytes())?;
    }
    if args.table {
        print!("{}", table());
    } else {
        println!("{json}");
    }
    Ok(())
}

fn seed_extract(image: &Path, out: Option<&Path>) -> Result<Status> {
    let img = SramImage::from_bytes(&read(image)?)?;
    let seed = extract_seed(&img);
    if let Some(out) = out {
        write(out, seed.as_bytes())?;
    }
    println!("{}", seed.to_hex());
    Ok(Status::Ok)
}

fn generate(bytes: u64, src: &SeedSource, sim: &SimArgs, out: Option<&Path>) -> Result<Status> {
    let mut gen = if let Some(p) = &src.seed_file {
        GeneratorState::from_seed(&Seed::from_bytes(&read(p)?)?)
    } else if let Some(p) = &src.image {
        boot(&SramImage::from_bytes(&read(p)?)?).1
    } else {
        boot(&load_config(sim)?.sram_model()?.power_on()).1
    };
    let n = usize::try_from(bytes).context("byte count too large")?;
    let mut buf = vec![0u8; n];
    gen.fill_bytes(&mut buf)?;
    match out {
        Some(p) => write(p, &buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SimulationSidecar {
    #[serde(flatten)]
    meta: StreamMeta,
    config: SourceConfig,
}

fn simulate(source: Source, count: u64, sim: &SimArgs, out: &Path) -> Result<Status> {
    let cfg = load_config(sim)?;
    let count = usize::try_from(count).context("count too large")?;
    let stream = match source {
        Source::Vlo => cfg.vlo_model()?.stream(count),
        Source::Temp => cfg.temp_model()?.stream(count),
        Source::Sram => sram_stream(&cfg.sram_model()?.power_cycles(count)),
    };
    write(out, &stream.samples)?;
    let meta = SimulationSidecar {
        meta: stream.meta(),
        config: cfg,
    };
    write(
        &sidecar(out),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct EstimateOutput {
    input: String,
    source_kind: SourceKind,
    report: EntropyReport,
}

fn estimate(input: &Path, args: &ReportArgs) -> Result<Status> {
    let samples = read(input)?;
    let side = sidecar(input);
    let (kind, rate) = if side.exists() {
        let meta: StreamMeta = serde_json::from_slice(&read(&side)?)
            .with_context(|| format!("parsing {}", side.display()))?;
        (meta.source_kind, meta.rate)
    } else {
        (SourceKind::External, None)
    };
    let stream = SampleStream::new(samples, kind, rate);
    let report = full_report(&stream)?;
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let out = EstimateOutput {
        input: input.display().to_string(),
        source_kind: kind,
        report,
    };
    emit(&out, || EntropyReport::table(&[(&name, &out.report)]), args)?;
    Ok(Status::Ok)
}

fn sts_batch(
    files: &[PathBuf],
    generate: Option<usize>,
    bits: usize,
    format: Format,
    block_len: usize,
    sim: &SimArgs,
    args: &ReportArgs,
) -> Result<Status> {
    let streams: Vec<Vec<u8>> = match generate {
        Some(n) => {
            if n == 0 {
                bail!("--generate needs at least one stream");
            }
            if bits == 0 || !bits.is_multiple_of(8) {
                bail!("--bits must be a positive multiple of 8, got {bits}");
            }
            boot_outputs(&load_config(sim)?, n, bits / 8)?
                .into_iter()
                .map(|(_, out)| sts::bits_from_bytes(&out))
                .collect()
        }
        None => {
            if files.is_empty() {
                bail!("no input: pass bit files or --generate N");
            }
            let format = match format {
                Format::Auto => BitFormat::Auto,
                Format::Packed => BitFormat::Packed,
                Format::Ascii => BitFormat::Ascii,
            };
            files
                .iter()
                .map(|f| Ok(sts::parse_bits(&read(f)?, format)?))
                .collect::<Result<_>>()?
        }
    };
    let report = sts::run_batch(&streams, block_len)?;
    emit(&report, || report.table(), args)?;
    Ok(if report.passed {
        Status::Ok
    } else {
        Status::StatisticalFailure
    })
}

fn harvest(
    duration: f64,
    threshold: u64,
    min_interval: f64,
    sim: &SimArgs,
    args: &ReportArgs,
) -> Result<Status> {
    #[derive(Serialize)]
    struct HarvestOutput {
        stats: embrng::sources::HarvestStats,
        pools: embrng::PoolSnapshot,
        generator_seeded: bool,
    }
    if threshold == 0 {
        bail!("--threshold must be at least 1");
    }
    if !(min_interval >= 0.0 && min_interval.is_finite()) {
        bail!("--min-interval must be non-negative");
    }
    let cfg = load_config(sim)?;
    let mut pools = PoolSet::with_config(AccumulatorConfig {
        reseed_threshold: threshold,
        min_reseed_interval: min_interval,
    });
    let mut gen = GeneratorState::new();
    let stats = run_harvest(
        &mut cfg.vlo_model()?,
        &mut cfg.temp_model()?,
        &mut pools,
        &mut gen,
        duration,
    )?;
    let out = HarvestOutput {
        stats,
        pools: pools.snapshot(),
        generator_seeded: gen.is_seeded(),
    };
    let table = || {
        let s = &out.stats;
        let c = &s.cadence;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5} s"));
        format!(
            "simulated {:.3} s: {} VLO + {} temperature events, {} reseeds\n\
             first reseed at {} with {} pool-0 events; mean interval {}\n\
             cadence at {} Hz, threshold {}:\n  round-robin routing   {:.5} s\n  pool-0-only routing   {:.5} s\n\
             pool events: {:?}\n",
            s.simulated_seconds,
            s.vlo_events,
            s.temp_events,
            s.reseeds,
            opt(s.first_reseed_at),
            s.pool0_events_at_first_reseed.map_or("-".into(), |v| v.to_string()),
            opt(s.mean_reseed_interval),
            c.aggregate_rate_hz,
            c.threshold,
            c.round_robin_secs,
            c.direct_secs,
            out.pools.event_counts,
        )
    };
    emit(&out, table, args)?;
    Ok(Status::Ok)
}

fn calibrate(
    target: CalibrateTarget,
    samples: usize,
    sim: &SimArgs,
    args: &ReportArgs,
) -> Result<Status> {
    let cfg = load_config(sim)?;
    let seed = cfg.noise_seed;
    let wants = |t| target == CalibrateTarget::All || target == t;
    let mut fits: Vec<Fit> = Vec::new();
    if wants(CalibrateTarget::Vlo) {
        fits.push(calibration::calibrate_vlo(
            cfg.vlo,
            calibration::VLO_TARGET,
            samples,
            seed,
        )?);
    }
    if wants(CalibrateTarget::Temp) {
        fits.push(calibration::calibrate_temp(
            cfg.temp,
            calibration::TEMP_TARGET,
            samples,
            seed,
        )?);
    }
    if wants(CalibrateTarget::Sram) {
        fits.push(calibration::calibrate_sram(
            cfg.sram,
            calibration::SRAM_TARGET,
            calibration::SRAM_STARTUPS,
            seed,
        )?);
    }
    let table = || {
        let mut s = format!(
            "{:<18} {:>14} {:>12} {:>8}\n",
            "parameter", "value", "min-entropy", "target"
        );
        for f in &fits {
            s += &format!(
                "{:<18} {:>14.6e} {:>12.4} {:>8.4}\n",
                f.parameter, f.value, f.min_entropy, f.target
            );
        }
        s
    };
    emit(&fits, table, args)?;
    Ok(Status::Ok)
}

fn pipeline(
    streams: usize,
    bits: usize,
    harvest_seconds: f64,
    block_len: usize,
    sim: &SimArgs,
    args: &ReportArgs,
) -> Result<Status> {
    if !(harvest_seconds >= 0.0 && harvest_seconds.is_finite()) {
        bail!("--harvest-seconds must be non-negative");
    }
    let report = run_pipeline(&PipelineConfig {
        sources: load_config(sim)?,
        streams,
        bits_per_stream: bits,
        harvest_seconds,
        block_len,
    })?;
    let table = || {
        format!(
            "{} streams from {} distinct boot seeds, {} reseeds during harvest\n{}",
            report.sts.sequences,
            report.distinct_seeds,
            report.total_reseeds,
            report.sts.table()
        )
    };
    emit(&report, table, args)?;
    Ok(if report.sts.passed {
        Status::Ok
    } else {
        Status::StatisticalFailure
    })
}
