//! End-to-end chains: SRAM boot to seed to generator, optionally with a
//! runtime harvest, and the statistical batch on the output.

use rayon::prelude::*;
use serde::Serialize;

use crate::accumulator::PoolSet;
use crate::crc::{extract_seed, Seed, SramImage};
use crate::error::{Error, Result};
use crate::generator::GeneratorState;
use crate::sources::{run_harvest, HarvestStats, SourceConfig};
use crate::sts::{bits_from_bytes, run_batch, BatchReport};

/// Generator keyed from the seed of one power-on image.
pub fn boot(image: &SramImage) -> (Seed, GeneratorState) {
    let seed = extract_seed(image);
    (seed, GeneratorState::from_seed(&seed))
}

/// `count` consecutive power-ons of the simulated device, each booted
/// into a fresh generator that emits `bytes` of output.
pub fn boot_outputs(
    config: &SourceConfig,
    count: usize,
    bytes: usize,
) -> Result<Vec<(Seed, Vec<u8>)>> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let images = config.sram_model()?.power_cycles(count);
    images
        .par_iter()
        .map(|img| {
            let (seed, mut gen) = boot(img);
            let mut out = vec![0u8; bytes];
            gen.fill_bytes(&mut out)?;
            Ok((seed, out))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub sources: SourceConfig,
    pub streams: usize,
    pub bits_per_stream: usize,
    /// Simulated runtime harvest before each stream is drawn; 0 skips it.
    pub harvest_seconds: f64,
    pub block_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub distinct_seeds: usize,
    /// Harvest statistics of the first stream, when a harvest ran.
    pub harvest: Option<HarvestStats>,
    pub total_reseeds: u64,
    pub sts: BatchReport,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.sources.validate()?;
    if cfg.streams == 0 {
        return Err(Error::EmptyBatch);
    }
    if !cfg.bits_per_stream.is_multiple_of(8) || cfg.bits_per_stream == 0 {
        return Err(Error::InvalidParameter(format!(
            "bits per stream must be a positive multiple of 8, got {}",
            cfg.bits_per_stream
        )));
    }
    let mut sram = cfg.sources.sram_model()?;
    let mut vlo = cfg.sources.vlo_model()?;
    let mut temp = cfg.sources.temp_model()?;
    let mut seeds = std::collections::HashSet::new();
    let mut streams = Vec::with_capacity(cfg.streams);
    let mut first_harvest = None;
    let mut total_reseeds = 0;

    for _ in 0..cfg.streams {
        let (seed, mut gen) = boot(&sram.power_on());
        seeds.insert(seed);
        if cfg.harvest_seconds > 0.0 {
            let mut pools = PoolSet::new();
            let stats = run_harvest(
                &mut vlo,
                &mut temp,
                &mut pools,
                &mut gen,
                cfg.harvest_seconds,
            )?;
            total_reseeds += stats.reseeds;
            first_harvest.get_or_insert(stats);
        }
        let mut out = vec![0u8; cfg.bits_per_stream / 8];
        gen.fill_bytes(&mut out)?;
        streams.push(bits_from_bytes(&out));
    }

    Ok(PipelineReport {
        distinct_seeds: seeds.len(),
        harvest: first_harvest,
        total_reseeds,
        sts: run_batch(&streams, cfg.block_len)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boot_outputs_are_distinct_and_reproducible() {
        let cfg = SourceConfig::default();
        let a = boot_outputs(&cfg, 4, 64).unwrap();
        let b = boot_outputs(&cfg, 4, 64).unwrap();
        assert_eq!(a, b);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(a[i].0, a[j].0);
                assert_ne!(a[i].1, a[j].1);
            }
        }
    }

    #[test]
    fn small_pipeline() {
        let cfg = PipelineConfig {
            sources: SourceConfig::default(),
            streams: 3,
            bits_per_stream: 8000,
            harvest_seconds: 0.2,
            block_len: 128,
        };
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.distinct_seeds, 3);
        assert!(r.total_reseeds >= 3);
        assert_eq!(r.sts.sequences, 3);
    }
}
