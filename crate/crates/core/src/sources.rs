//! Stochastic models of the three on-chip entropy sources and the
//! simulated-time harvest loop that feeds them into the accumulator.
//!
//! All models draw from their own seeded ChaCha stream, so a fixed
//! `(parameters, seed)` pair reproduces a stream byte for byte.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::accumulator::{PoolSet, ReseedCadence};
use crate::crc::{SramImage, SRAM_LEN};
use crate::error::{Error, Result};
use crate::generator::GeneratorState;
use crate::stream::{SampleStream, SourceKind};

pub use crate::stream::StreamMeta;

/// Number of SRAM cells (bits).
pub const SRAM_BITS: usize = SRAM_LEN * 8;

/// Source tags used when the harvest loop routes events.
pub const VLO_TAG: u8 = 0;
pub const TEMP_TAG: u8 = 1;

fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A seed drawn from the operating system, for exploratory runs.
pub fn os_noise_seed() -> u64 {
    rand::rngs::OsRng.next_u64()
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { what, value })
    }
}

fn non_negative(what: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be >= 0, got {value}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VloParams {
    /// Typical oscillator frequency, Hz.
    pub nominal_rate: f64,
    /// Reference clock the period is captured against, Hz.
    pub fast_clock: f64,
    /// Standard deviation of each period, seconds.
    pub jitter_sigma: f64,
    /// Linear frequency ramp, Hz per second of simulated time.
    pub wander_amplitude: f64,
}

impl Default for VloParams {
    fn default() -> Self {
        VloParams {
            nominal_rate: 9500.0,
            fast_clock: 24e6,
            jitter_sigma: DEFAULT_VLO_JITTER_SIGMA,
            wander_amplitude: 0.0,
        }
    }
}

/// Shipped calibration, found with `embrng calibrate`.
pub const DEFAULT_VLO_JITTER_SIGMA: f64 = 7.28e-8;
pub const DEFAULT_TEMP_NOISE_SIGMA: f64 = 3.31;
pub const DEFAULT_SRAM_BIAS_MIX: f64 = 0.103;

impl VloParams {
    pub fn validate(&self) -> Result<()> {
        positive("nominal_rate", self.nominal_rate)?;
        positive("fast_clock", self.fast_clock)?;
        if self.fast_clock < 1000.0 * self.nominal_rate {
            return Err(Error::InvalidParameter(format!(
                "fast_clock {} must be at least 1000 x nominal_rate {}",
                self.fast_clock, self.nominal_rate
            )));
        }
        non_negative("jitter_sigma", self.jitter_sigma)?;
        if !self.wander_amplitude.is_finite() {
            return Err(Error::InvalidParameter(
                "wander_amplitude must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Very-low-power oscillator whose period is timed against a fast clock.
#[derive(Debug, Clone)]
pub struct VloModel {
    params: VloParams,
    rng: ChaCha8Rng,
    elapsed: f64,
}

impl VloModel {
    pub fn new(params: VloParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(VloModel {
            params,
            rng: noise_rng(seed),
            elapsed: 0.0,
        })
    }

    pub fn params(&self) -> &VloParams {
        &self.params
    }

    /// Next captured period in fast-clock ticks.
    pub fn next_period_ticks(&mut self) -> u64 {
        let p = &self.params;
        // Keep the ramped frequency positive for long negative ramps.
        let freq = (p.nominal_rate + p.wander_amplitude * self.elapsed).max(1e-3 * p.nominal_rate);
        let noise: f64 = self.rng.sample(StandardNormal);
        let period = (1.0 / freq + p.jitter_sigma * noise).max(0.0);
        self.elapsed += period;
        (period * p.fast_clock).round() as u64
    }

    /// Low byte of the next captured period.
    pub fn sample(&mut self) -> u8 {
        self.next_period_ticks() as u8
    }

    pub fn stream(&mut self, count: usize) -> SampleStream {
        let samples = (0..count).map(|_| self.sample()).collect();
        SampleStream::new(samples, SourceKind::Vlo, Some(self.params.nominal_rate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TempParams {
    /// Mean 12-bit ADC code at t = 0.
    pub baseline_code: f64,
    /// Codes per second.
    pub drift: f64,
    /// Standard deviation of conversion noise, codes.
    pub noise_sigma: f64,
    /// Conversions per second.
    pub sample_rate: f64,
}

impl Default for TempParams {
    fn default() -> Self {
        TempParams {
            baseline_code: 2100.0,
            drift: 0.0,
            noise_sigma: DEFAULT_TEMP_NOISE_SIGMA,
            sample_rate: 9500.0,
        }
    }
}

impl TempParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=4095.0).contains(&self.baseline_code) {
            return Err(Error::InvalidParameter(format!(
                "baseline_code {} outside 0..=4095",
                self.baseline_code
            )));
        }
        if !self.drift.is_finite() {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        non_negative("noise_sigma", self.noise_sigma)?;
        positive("sample_rate", self.sample_rate)
    }
}

/// Internal temperature sensor read through a 12-bit ADC.
#[derive(Debug, Clone)]
pub struct TempModel {
    params: TempParams,
    rng: ChaCha8Rng,
    conversions: u64,
}

impl TempModel {
    pub fn new(params: TempParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(TempModel {
            params,
            rng: noise_rng(seed),
            conversions: 0,
        })
    }

    pub fn params(&self) -> &TempParams {
        &self.params
    }

    /// Next raw 12-bit conversion.
    pub fn next_code(&mut self) -> u16 {
        let p = &self.params;
        let t = self.conversions as f64 / p.sample_rate;
        self.conversions += 1;
        let noise: f64 = self.rng.sample(StandardNormal);
        (p.baseline_code + p.drift * t + p.noise_sigma * noise)
            .round()
            .clamp(0.0, 4095.0) as u16
    }

    /// Low eight bits of the next conversion.
    pub fn sample(&mut self) -> u8 {
        self.next_code() as u8
    }

    pub fn stream(&mut self, count: usize) -> SampleStream {
        let samples = (0..count).map(|_| self.sample()).collect();
        SampleStream::new(samples, SourceKind::Temp, Some(self.params.sample_rate))
    }
}

/// Parameters from which per-cell power-up biases are drawn.
///
/// Each cell is one of: near-0.5 (`bias_mix` of cells, bias uniform in
/// `0.5 ± half_spread`), weak (`weak_fraction`, flips away from its
/// preferred value with probability uniform in `0..weak_flip_max`), or
/// fully stable. Preferred values are 1 for `one_fraction` of cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SramParams {
    pub bias_mix: f64,
    pub half_spread: f64,
    pub weak_fraction: f64,
    pub weak_flip_max: f64,
    pub one_fraction: f64,
    /// Seed for the fixed per-device bias layout (not the per-boot noise).
    pub device_seed: u64,
}

impl Default for SramParams {
    fn default() -> Self {
        SramParams {
            bias_mix: DEFAULT_SRAM_BIAS_MIX,
            half_spread: 0.1,
            weak_fraction: 0.3,
            weak_flip_max: 0.1,
            one_fraction: 0.0,
            device_seed: 0x5EED_0430,
        }
    }
}

impl SramParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bias_mix", self.bias_mix),
            ("half_spread", self.half_spread),
            ("weak_fraction", self.weak_fraction),
            ("weak_flip_max", self.weak_flip_max),
            ("one_fraction", self.one_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.bias_mix + self.weak_fraction > 1.0 {
            return Err(Error::InvalidParameter(
                "bias_mix + weak_fraction exceeds 1".into(),
            ));
        }
        if self.half_spread > 0.5 {
            return Err(Error::InvalidParameter("half_spread exceeds 0.5".into()));
        }
        Ok(())
    }

    pub fn cell_biases(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = noise_rng(self.device_seed);
        Ok((0..SRAM_BITS)
            .map(|_| {
                let prefers_one = rng.gen_bool(self.one_fraction);
                let u: f64 = rng.gen();
                let flip = if u < self.bias_mix {
                    return 0.5 + self.half_spread * (2.0 * rng.gen::<f64>() - 1.0);
                } else if u < self.bias_mix + self.weak_fraction {
                    self.weak_flip_max * rng.gen::<f64>()
                } else {
                    0.0
                };
                if prefers_one {
                    1.0 - flip
                } else {
                    flip
                }
            })
            .collect())
    }
}

/// Power-on state of a 10 KB SRAM; one independent Bernoulli cell per bit.
#[derive(Debug, Clone)]
pub struct SramModel {
    cell_bias: Vec<f64>,
    rng: ChaCha8Rng,
}

impl SramModel {
    pub fn new(params: &SramParams, seed: u64) -> Result<Self> {
        Self::from_biases(params.cell_biases()?, seed)
    }

    pub fn from_biases(cell_bias: Vec<f64>, seed: u64) -> Result<Self> {
        if cell_bias.len() != SRAM_BITS {
            return Err(Error::InvalidParameter(format!(
                "expected {SRAM_BITS} cell biases, got {}",
                cell_bias.len()
            )));
        }
        if let Some(b) = cell_bias.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidParameter(format!(
                "cell bias {b} outside [0, 1]"
            )));
        }
        Ok(SramModel {
            cell_bias,
            rng: noise_rng(seed),
        })
    }

    pub fn cell_bias(&self) -> &[f64] {
        &self.cell_bias
    }

    /// One power cycle. Bit `i` lands in byte `i / 8`, most significant first.
    pub fn power_on(&mut self) -> SramImage {
        let mut image = SramImage::zeroed();
        let bytes = image.as_bytes_mut();
        for (i, &b) in self.cell_bias.iter().enumerate() {
            let one = if b <= 0.0 {
                false
            } else if b >= 1.0 {
                true
            } else {
                self.rng.gen::<f64>() < b
            };
            if one {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        image
    }

    pub fn power_cycles(&mut self, n: usize) -> Vec<SramImage> {
        (0..n).map(|_| self.power_on()).collect()
    }
}

pub fn sram_power_on(model: &mut SramModel) -> SramImage {
    model.power_on()
}

/// Concatenation of successive power-on images, one sample per byte.
pub fn sram_stream(images: &[SramImage]) -> SampleStream {
    let samples = images
        .iter()
        .flat_map(|img| img.as_bytes().iter().copied())
        .collect();
    SampleStream::new(samples, SourceKind::Sram, None)
}

/// For every byte address, how many distinct values it took across `images`.
pub fn distinct_values_per_byte(images: &[SramImage]) -> Vec<usize> {
    (0..SRAM_LEN)
        .map(|addr| {
            let mut seen = [false; 256];
            images
                .iter()
                .for_each(|img| seen[img.as_bytes()[addr] as usize] = true);
            seen.iter().filter(|&&s| s).count()
        })
        .collect()
}

/// Every source's parameters plus the simulation noise seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub noise_seed: u64,
    pub vlo: VloParams,
    pub temp: TempParams,
    pub sram: SramParams,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            noise_seed: 1,
            vlo: VloParams::default(),
            temp: TempParams::default(),
            sram: SramParams::default(),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        self.vlo.validate()?;
        self.temp.validate()?;
        self.sram.validate()
    }

    /// Per-source noise seeds derived from `noise_seed`, so the sources do
    /// not share a noise stream.
    pub fn vlo_model(&self) -> Result<VloModel> {
        VloModel::new(self.vlo, self.noise_seed.wrapping_mul(3).wrapping_add(1))
    }

    pub fn temp_model(&self) -> Result<TempModel> {
        TempModel::new(self.temp, self.noise_seed.wrapping_mul(3).wrapping_add(2))
    }

    pub fn sram_model(&self) -> Result<SramModel> {
        SramModel::new(&self.sram, self.noise_seed.wrapping_mul(3).wrapping_add(3))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarvestStats {
    pub simulated_seconds: f64,
    pub vlo_events: u64,
    pub temp_events: u64,
    pub reseeds: u64,
    /// Simulated time of the first reseed.
    pub first_reseed_at: Option<f64>,
    /// Pool-0 event count at the moment the first reseed fired.
    pub pool0_events_at_first_reseed: Option<u64>,
    /// Mean simulated time between consecutive reseeds.
    pub mean_reseed_interval: Option<f64>,
    pub cadence: ReseedCadence,
}

/// Run both runtime sources for `duration` simulated seconds.
///
/// Events arrive at each source's nominal rate (the k-th at `k / rate`);
/// simultaneous arrivals are ordered VLO first. Every sample becomes a
/// one-byte event and a reseed fires as soon as the accumulator allows.
pub fn run_harvest(
    vlo: &mut VloModel,
    temp: &mut TempModel,
    pools: &mut PoolSet,
    gen: &mut GeneratorState,
    duration: f64,
) -> Result<HarvestStats> {
    positive("duration", duration)?;
    let vlo_rate = vlo.params().nominal_rate;
    let temp_rate = temp.params().sample_rate;
    let (mut kv, mut kt) = (1u64, 1u64);
    let mut reseed_times = Vec::new();
    let mut pool0_at_first = None;

    loop {
        let tv = kv as f64 / vlo_rate;
        let tt = kt as f64 / temp_rate;
        let now = tv.min(tt);
        if now > duration {
            break;
        }
        if tv <= tt {
            pools.add(VLO_TAG, &[vlo.sample()])?;
            kv += 1;
        } else {
            pools.add(TEMP_TAG, &[temp.sample()])?;
            kt += 1;
        }
        if pools.reseed_ready_at(now) {
            if reseed_times.is_empty() {
                pool0_at_first = Some(pools.event_count(0));
            }
            pools.reseed_at(gen, now)?;
            reseed_times.push(now);
        }
    }

    let mean_reseed_interval = (reseed_times.len() > 1).then(|| {
        (reseed_times[reseed_times.len() - 1] - reseed_times[0]) / (reseed_times.len() - 1) as f64
    });
    Ok(HarvestStats {
        simulated_seconds: duration,
        vlo_events: kv - 1,
        temp_events: kt - 1,
        reseeds: reseed_times.len() as u64,
        first_reseed_at: reseed_times.first().copied(),
        pool0_events_at_first_reseed: pool0_at_first,
        mean_reseed_interval,
        cadence: ReseedCadence::from_aggregate_rate(
            vlo_rate + temp_rate,
            pools.config().reseed_threshold,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_vlo() -> VloParams {
        VloParams {
            jitter_sigma: 0.0,
            ..VloParams::default()
        }
    }

    #[test]
    fn vlo_degenerates_to_constant() {
        let mut m = VloModel::new(quiet_vlo(), 9).unwrap();
        let expect = (24e6f64 / 9500.0).round() as u64 as u8;
        assert!((0..1000).all(|_| m.sample() == expect));
    }

    #[test]
    fn vlo_mean_period() {
        let mut m = VloModel::new(VloParams::default(), 3).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| m.next_period_ticks() as f64).sum::<f64>() / n as f64;
        let nominal = 24e6 / 9500.0;
        assert!((mean - nominal).abs() / nominal < 0.01);
    }

    #[test]
    fn vlo_param_checks() {
        let bad = VloParams {
            fast_clock: 1e6,
            ..VloParams::default()
        };
        assert!(VloModel::new(bad, 0).is_err());
        let bad = VloParams {
            nominal_rate: 0.0,
            ..VloParams::default()
        };
        assert!(VloModel::new(bad, 0).is_err());
    }

    #[test]
    fn temp_degenerates_to_constant() {
        let p = TempParams {
            noise_sigma: 0.0,
            ..TempParams::default()
        };
        let mut m = TempModel::new(p, 1).unwrap();
        assert!((0..1000).all(|_| m.sample() == (2100u16 & 0xFF) as u8));
    }

    #[test]
    fn temp_codes_are_clamped() {
        let p = TempParams {
            baseline_code: 4090.0,
            noise_sigma: 50.0,
            drift: 1e5,
            ..TempParams::default()
        };
        let mut m = TempModel::new(p, 2).unwrap();
        assert!((0..20_000).all(|_| m.next_code() <= 4095));
        let p = TempParams {
            baseline_code: 2.0,
            noise_sigma: 50.0,
            ..TempParams::default()
        };
        let mut m = TempModel::new(p, 2).unwrap();
        assert!((0..20_000).all(|_| m.next_code() <= 4095));
    }

    #[test]
    fn sram_degenerate_biases() {
        let mut m = SramModel::from_biases(vec![0.0; SRAM_BITS], 1).unwrap();
        assert_eq!(m.power_on(), SramImage::zeroed());
        let mut m = SramModel::from_biases(vec![1.0; SRAM_BITS], 1).unwrap();
        assert!(m.power_on().as_bytes().iter().all(|&b| b == 0xFF));
        assert!(SramModel::from_biases(vec![0.0; 10], 1).is_err());
        assert!(SramModel::from_biases(vec![1.5; SRAM_BITS], 1).is_err());
    }

    #[test]
    fn sram_bit_order() {
        let mut bias = vec![0.0; SRAM_BITS];
        bias[0] = 1.0;
        bias[15] = 1.0;
        let img = SramModel::from_biases(bias, 0).unwrap().power_on();
        assert_eq!(&img.as_bytes()[..2], &[0x80, 0x01]);
    }

    #[test]
    fn determinism() {
        let cfg = SourceConfig::default();
        assert_eq!(
            cfg.vlo_model().unwrap().stream(1000),
            cfg.vlo_model().unwrap().stream(1000)
        );
        assert_eq!(
            cfg.temp_model().unwrap().stream(1000),
            cfg.temp_model().unwrap().stream(1000)
        );
        assert_eq!(
            cfg.sram_model().unwrap().power_on(),
            cfg.sram_model().unwrap().power_on()
        );
        let other = SourceConfig {
            noise_seed: 2,
            ..cfg
        };
        assert_ne!(
            cfg.vlo_model().unwrap().stream(1000),
            other.vlo_model().unwrap().stream(1000)
        );
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SourceConfig =
            serde_json::from_str(r#"{"noise_seed": 5, "vlo": {"jitter_sigma": 0.0}}"#).unwrap();
        assert_eq!(cfg.noise_seed, 5);
        assert_eq!(cfg.vlo.jitter_sigma, 0.0);
        assert_eq!(cfg.vlo.nominal_rate, 9500.0);
        assert_eq!(cfg.temp, TempParams::default());
    }

    fn harvest(duration: f64) -> (HarvestStats, PoolSet) {
        let cfg = SourceConfig::default();
        let mut pools = PoolSet::new();
        let mut gen = GeneratorState::new();
        let stats = run_harvest(
            &mut cfg.vlo_model().unwrap(),
            &mut cfg.temp_model().unwrap(),
            &mut pools,
            &mut gen,
            duration,
        )
        .unwrap();
        assert_eq!(gen.is_seeded(), stats.reseeds > 0);
        (stats, pools)
    }

    #[test]
    fn harvest_reseeds_after_threshold() {
        let (stats, _) = harvest((58 * 32) as f64 / 9500.0);
        assert_eq!(stats.vlo_events + stats.temp_events, 58 * 32 * 2);
        assert!(stats.reseeds >= 1);
        assert_eq!(stats.pool0_events_at_first_reseed, Some(58));
        assert_eq!(stats.vlo_events, stats.temp_events);
    }

    #[test]
    fn harvest_below_threshold() {
        // each source lands in pool 0 once every 32 events
        let (stats, pools) = harvest((28 * 32) as f64 / 9500.0);
        assert_eq!(stats.reseeds, 0);
        assert_eq!(pools.event_count(0), 56);
        assert!(harvest_err(0.0));
    }

    fn harvest_err(duration: f64) -> bool {
        let cfg = SourceConfig::default();
        run_harvest(
            &mut cfg.vlo_model().unwrap(),
            &mut cfg.temp_model().unwrap(),
            &mut PoolSet::new(),
            &mut GeneratorState::new(),
            duration,
        )
        .is_err()
    }
}
