//! The 32-pool entropy accumulator.
//!
//! Each source has its own round-robin cursor over the pools. Only the raw
//! payload enters a pool's hash; the source tag is used for routing and
//! never absorbed. Pool 0 gates reseeding: once it has absorbed
//! `reseed_threshold` events the pools whose index `i` satisfies
//! `2^i | r` (r = new reseed count) are drained into the generator.

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generator::GeneratorState;

pub const POOLS: usize = 32;
pub const MAX_PAYLOAD: usize = 32;
pub const DEFAULT_RESEED_THRESHOLD: u64 = 58;

/// Number of distinct source tags.
pub const SOURCES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntropyEvent {
    pub source_tag: u8,
    pub payload: Vec<u8>,
}

impl EntropyEvent {
    pub fn new(source_tag: u8, payload: impl Into<Vec<u8>>) -> Result<Self> {
        let payload = payload.into();
        check_payload(&payload)?;
        Ok(EntropyEvent {
            source_tag,
            payload,
        })
    }
}

fn check_payload(payload: &[u8]) -> Result<()> {
    if payload.is_empty() || payload.len() > MAX_PAYLOAD {
        return Err(Error::PayloadSize {
            len: payload.len(),
            max: MAX_PAYLOAD,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccumulatorConfig {
    /// Events pool 0 must hold before a reseed is allowed.
    pub reseed_threshold: u64,
    /// Minimum caller-clock seconds between reseeds.
    pub min_reseed_interval: f64,
}

impl Default for AccumulatorConfig {
    fn default() -> Self {
        AccumulatorConfig {
            reseed_threshold: DEFAULT_RESEED_THRESHOLD,
            min_reseed_interval: 0.0,
        }
    }
}

#[derive(Clone, Default)]
struct Pool {
    hasher: Sha256,
    events: u64,
    bytes: u64,
}

impl Pool {
    fn absorb(&mut self, payload: &[u8]) {
        self.hasher.update(payload);
        self.events += 1;
        self.bytes += payload.len() as u64;
    }

    fn drain(&mut self) -> [u8; 32] {
        let digest = std::mem::take(self).hasher.finalize();
        digest.into()
    }

    fn peek(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }
}

/// Indices of the pools drained at reseed number `r` (r >= 1).
pub fn drained_pools(r: u64) -> impl Iterator<Item = usize> {
    (0..POOLS).take_while(move |&i| r.is_multiple_of(1u64 << i))
}

/// Per-pool counters and reseed count, for diagnostics output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSnapshot {
    pub event_counts: Vec<u64>,
    pub byte_counts: Vec<u64>,
    pub reseed_counter: u64,
    pub reseed_threshold: u64,
    pub ready: bool,
}

/// Single-owner accumulator.
#[derive(Clone)]
pub struct PoolSet {
    pools: [Pool; POOLS],
    cursors: [u8; SOURCES],
    reseed_counter: u64,
    last_reseed: Option<f64>,
    config: AccumulatorConfig,
}

impl Default for PoolSet {
    fn default() -> Self {
        Self::new()
    }
}

impl PoolSet {
    pub fn new() -> Self {
        Self::with_config(AccumulatorConfig::default())
    }

    pub fn with_config(config: AccumulatorConfig) -> Self {
        PoolSet {
            pools: Default::default(),
            cursors: [0; SOURCES],
            reseed_counter: 0,
            last_reseed: None,
            config,
        }
    }

    pub fn config(&self) -> &AccumulatorConfig {
        &self.config
    }

    /// Absorb one event; returns the pool index it went to.
    pub fn add_event(&mut self, event: &EntropyEvent) -> Result<usize> {
        self.add(event.source_tag, &event.payload)
    }

    pub fn add(&mut self, source_tag: u8, payload: &[u8]) -> Result<usize> {
        check_payload(payload)?;
        let cursor = &mut self.cursors[source_tag as usize];
        let pool = *cursor as usize;
        *cursor = ((pool + 1) % POOLS) as u8;
        self.pools[pool].absorb(payload);
        Ok(pool)
    }

    pub fn next_pool(&self, source_tag: u8) -> usize {
        self.cursors[source_tag as usize] as usize
    }

    pub fn event_count(&self, pool: usize) -> u64 {
        self.pools[pool].events
    }

    /// Current digest of a pool's hash context, without draining it.
    pub fn pool_digest(&self, pool: usize) -> [u8; 32] {
        self.pools[pool].peek()
    }

    pub fn reseed_counter(&self) -> u64 {
        self.reseed_counter
    }

    pub fn reseed_ready(&self) -> bool {
        self.pools[0].events >= self.config.reseed_threshold
    }

    /// Like [`reseed_ready`](Self::reseed_ready) but also honours the
    /// minimum interval, measured on the caller's clock.
    pub fn reseed_ready_at(&self, now: f64) -> bool {
        self.reseed_ready()
            && self
                .last_reseed
                .is_none_or(|t| now - t >= self.config.min_reseed_interval)
    }

    /// Drain the scheduled pools into `gen`. Returns the drained indices.
    pub fn reseed(&mut self, gen: &mut GeneratorState) -> Result<Vec<usize>> {
        if !self.reseed_ready() {
            return Err(Error::NotReady {
                events: self.pools[0].events,
                threshold: self.config.reseed_threshold,
            });
        }
        let r = self.reseed_counter + 1;
        let drained: Vec<usize> = drained_pools(r).collect();
        let mut material = Vec::with_capacity(32 * drained.len());
        for &i in &drained {
            material.extend_from_slice(&self.pools[i].drain());
        }
        gen.reseed(&material)?;
        self.reseed_counter = r;
        Ok(drained)
    }

    pub fn reseed_at(&mut self, gen: &mut GeneratorState, now: f64) -> Result<Vec<usize>> {
        if self.reseed_ready() && !self.reseed_ready_at(now) {
            return Err(Error::InvalidParameter(format!(
                "reseed at t={now} inside the {}s minimum interval",
                self.config.min_reseed_interval
            )));
        }
        let drained = self.reseed(gen)?;
        self.last_reseed = Some(now);
        Ok(drained)
    }

    pub fn snapshot(&self) -> PoolSnapshot {
        PoolSnapshot {
            event_counts: self.pools.iter().map(|p| p.events).collect(),
            byte_counts: self.pools.iter().map(|p| p.bytes).collect(),
            reseed_counter: self.reseed_counter,
            reseed_threshold: self.config.reseed_threshold,
            ready: self.reseed_ready(),
        }
    }
}

/// Accumulator accepting events from many threads at once.
///
/// Each pool sits behind its own lock and cursors are atomics, so
/// producers only contend when they hit the same pool. Reseeding takes
/// `&mut self`.
pub struct SharedPoolSet {
    pools: [Mutex<Pool>; POOLS],
    cursors: [AtomicU8; SOURCES],
    reseed_counter: u64,
    config: AccumulatorConfig,
}

impl Default for SharedPoolSet {
    fn default() -> Self {
        Self::with_config(AccumulatorConfig::default())
    }
}

impl SharedPoolSet {
    pub fn with_config(config: AccumulatorConfig) -> Self {
        SharedPoolSet {
            pools: Default::default(),
            cursors: [const { AtomicU8::new(0) }; SOURCES],
            reseed_counter: 0,
            config,
        }
    }

    pub fn add(&self, source_tag: u8, payload: &[u8]) -> Result<usize> {
        check_payload(payload)?;
        // 256 is a multiple of 32, so the wrapping u8 counter stays in step.
        let pool =
            self.cursors[source_tag as usize].fetch_add(1, Ordering::Relaxed) as usize % POOLS;
        self.pools[pool]
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .absorb(payload);
        Ok(pool)
    }

    pub fn event_count(&self, pool: usize) -> u64 {
        self.pools[pool]
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .events
    }

    pub fn reseed_ready(&self) -> bool {
        self.event_count(0) >= self.config.reseed_threshold
    }

    pub fn reseed_counter(&self) -> u64 {
        self.reseed_counter
    }

    pub fn reseed(&mut self, gen: &mut GeneratorState) -> Result<Vec<usize>> {
        if !self.reseed_ready() {
            return Err(Error::NotReady {
                events: self.event_count(0),
                threshold: self.config.reseed_threshold,
            });
        }
        let r = self.reseed_counter + 1;
        let drained: Vec<usize> = drained_pools(r).collect();
        let mut material = Vec::with_capacity(32 * drained.len());
        for &i in &drained {
            let pool = self.pools[i].get_mut().unwrap_or_else(|e| e.into_inner());
            material.extend_from_slice(&pool.drain());
        }
        gen.reseed(&material)?;
        self.reseed_counter = r;
        Ok(drained)
    }
}

/// How events are assumed to reach pool 0 when converting a rate into a
/// reseed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// `event_rate` is the aggregate rate; pool 0 sees one event in 32.
    RoundRobin,
    /// `event_rate` is the rate of events landing in pool 0.
    DirectToPoolZero,
}

/// Seconds until pool 0 holds `threshold` events.
pub fn elapsed_reseed_time(event_rate: f64, threshold: u64, routing: Routing) -> Result<f64> {
    if !(event_rate > 0.0 && event_rate.is_finite()) {
        return Err(Error::NonPositive {
            what: "event rate",
            value: event_rate,
        });
    }
    let events = match routing {
        Routing::RoundRobin => threshold * POOLS as u64,
        Routing::DirectToPoolZero => threshold,
    };
    Ok(events as f64 / event_rate)
}

/// Both readings of the reseed cadence for an aggregate event rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReseedCadence {
    pub aggregate_rate_hz: f64,
    pub threshold: u64,
    /// Round-robin routing: `threshold * 32 / rate`.
    pub round_robin_secs: f64,
    /// Spacing between consecutive pool-0 events under round-robin.
    pub pool0_event_spacing_secs: f64,
    /// Every event counted toward pool 0: `threshold / rate`.
    pub direct_secs: f64,
}

impl ReseedCadence {
    pub fn from_aggregate_rate(rate: f64, threshold: u64) -> Result<Self> {
        Ok(ReseedCadence {
            aggregate_rate_hz: rate,
            threshold,
            round_robin_secs: elapsed_reseed_time(rate, threshold, Routing::RoundRobin)?,
            pool0_event_spacing_secs: elapsed_reseed_time(rate, 1, Routing::RoundRobin)?,
            direct_secs: elapsed_reseed_time(rate, threshold, Routing::DirectToPoolZero)?,
        })
    }
}
