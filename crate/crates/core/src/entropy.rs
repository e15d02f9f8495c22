//! Min-entropy estimators: most-common-value, collision, Markov and
//! compression, following the NIST SP 800-90B procedures.
//!
//! MCV runs on the raw sample alphabet. The other three are binary
//! estimators: the stream is expanded to bits (most significant first,
//! `bits_per_sample` bits per sample), estimated in bits per bit, and
//! scaled back to bits per sample by the sample width.
//!
//! Per-sample results are capped at log2 of the number of distinct symbols
//! observed, so a stream repeating one byte scores zero whatever its bit
//! pattern.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::SampleStream;

/// Two-sided 99% normal quantile used for every upper confidence bound.
pub const Z_99: f64 = 2.576;

/// Minimum samples for MCV, collision and Markov.
pub const MIN_SAMPLES: usize = 1000;

/// Minimum binarized length for the compression estimate.
pub const MIN_COMPRESSION_BITS: usize = 1_000_000;

const ROOT_TOL: f64 = 1e-9;
const ROOT_MAX_ITER: usize = 200;

/// Solve `f(p) = target` for a function decreasing on `[lo, hi]`.
fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..ROOT_MAX_ITER {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn require(estimator: &'static str, needed: usize, got: usize, unit: &'static str) -> Result<()> {
    if got < needed {
        return Err(Error::StreamTooShort {
            estimator,
            needed,
            got,
            unit,
        });
    }
    Ok(())
}

/// Most-common-value estimate over raw symbols, bits/sample.
pub fn mcv_samples(samples: &[u8]) -> Result<f64> {
    require("mcv", MIN_SAMPLES, samples.len(), "samples")?;
    let mut counts = [0usize; 256];
    for &s in samples {
        counts[s as usize] += 1;
    }
    let n = samples.len() as f64;
    let p_hat = *counts.iter().max().unwrap() as f64 / n;
    let p_u = (p_hat + Z_99 * (p_hat * (1.0 - p_hat) / n).sqrt()).min(1.0);
    Ok(-p_u.log2())
}

/// Collision estimate over a 0/1 sequence, bits/bit. The flag is set when
/// the bound could not be inverted and full entropy was reported.
pub fn collision_bits(bits: &[u8]) -> Result<(f64, bool)> {
    require("collision", MIN_SAMPLES, bits.len(), "bits")?;
    let n = bits.len();
    let mut times: Vec<f64> = Vec::with_capacity(n / 2);
    let mut i = 0;
    while i + 1 < n {
        let t = if bits[i] == bits[i + 1] {
            2
        } else if i + 2 < n {
            3
        } else {
            break;
        };
        times.push(t as f64);
        i += t;
    }
    let v = times.len();
    if v < 2 {
        return Ok((1.0, true));
    }
    let mean = times.iter().sum::<f64>() / v as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (v - 1) as f64;
    let lower = mean - Z_99 * var.sqrt() / (v as f64).sqrt();

    if lower >= collision_mean(0.5) {
        return Ok((1.0, true));
    }
    if lower <= 2.0 {
        return Ok((0.0, false));
    }
    let p = bisect_decreasing(collision_mean, lower, 0.5, 1.0);
    Ok((-p.log2(), false))
}

/// Expected time to first collision for a binary source with P(mode) = p.
fn collision_mean(p: f64) -> f64 {
    let q = 1.0 - p;
    if q <= 0.0 {
        return 2.0;
    }
    // F(q) = Γ(3, 1/q) q^3 e^{1/q}, and Γ(3, z) = 2 e^{-z} (1 + z + z²/2).
    let f = q + 2.0 * q * q + 2.0 * q * q * q;
    let d = 0.5 * (1.0 / p - 1.0 / q);
    p / (q * q) * (1.0 + d) * f - p / q * d
}

/// Markov estimate over a 0/1 sequence, bits/bit.
///
/// Initial and transition probabilities are replaced by their 99% upper
/// confidence bounds before the six candidate length-128 paths are scored.
pub fn markov_bits(bits: &[u8]) -> Result<f64> {
    require("markov", MIN_SAMPLES, bits.len(), "bits")?;
    let n = bits.len();
    let ones = bits.iter().filter(|&&b| b == 1).count();
    let mut o = [[0usize; 2]; 2];
    for w in bits.windows(2) {
        o[w[0] as usize][w[1] as usize] += 1;
    }

    let upper = |hits: usize, total: usize| -> f64 {
        if total == 0 {
            return 0.0;
        }
        let p = hits as f64 / total as f64;
        (p + Z_99 * (p * (1.0 - p) / total as f64).sqrt()).min(1.0)
    };
    let p0 = upper(n - ones, n);
    let p1 = upper(ones, n);
    let from0 = o[0][0] + o[0][1];
    let from1 = o[1][0] + o[1][1];
    let p00 = upper(o[0][0], from0);
    let p01 = upper(o[0][1], from0);
    let p10 = upper(o[1][0], from1);
    let p11 = upper(o[1][1], from1);

    // Work in log2 space; the raw products underflow for long paths.
    let lg = |p: f64| if p > 0.0 { p.log2() } else { f64::NEG_INFINITY };
    let paths = [
        lg(p0) + 127.0 * lg(p00),
        lg(p0) + 64.0 * lg(p01) + 63.0 * lg(p10),
        lg(p0) + lg(p01) + 126.0 * lg(p11),
        lg(p1) + lg(p10) + 126.0 * lg(p00),
        lg(p1) + 64.0 * lg(p10) + 63.0 * lg(p01),
        lg(p1) + 127.0 * lg(p11),
    ];
    let best = paths.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok((-best / 128.0).clamp(0.0, 1.0))
}

const COMP_BLOCK: usize = 6;
const COMP_DICT: usize = 1000;
const COMP_SIGMA_SCALE: f64 = 0.5907;

/// Compression (Maurer universal statistic) estimate over a 0/1 sequence,
/// bits/bit.
pub fn compression_bits(bits: &[u8]) -> Result<f64> {
    require("compression", MIN_COMPRESSION_BITS, bits.len(), "bits")?;
    let d = bits.len() / COMP_BLOCK;
    let k = d - COMP_DICT;
    let block = |i: usize| -> usize {
        bits[i * COMP_BLOCK..(i + 1) * COMP_BLOCK]
            .iter()
            .fold(0, |acc, &b| (acc << 1) | b as usize)
    };

    // 1-based block positions, as in the standard's description.
    let mut dict = [0usize; 1 << COMP_BLOCK];
    for i in 1..=COMP_DICT {
        dict[block(i - 1)] = i;
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for i in COMP_DICT + 1..=d {
        let b = block(i - 1);
        let dist = if dict[b] != 0 { i - dict[b] } else { i };
        dict[b] = i;
        let l = (dist as f64).log2();
        sum += l;
        sum_sq += l * l;
    }
    let kf = k as f64;
    let mean = sum / kf;
    let sigma = COMP_SIGMA_SCALE * (sum_sq / (kf - 1.0) - mean * mean).max(0.0).sqrt();
    let lower = mean - Z_99 * sigma / kf.sqrt();

    let g = CompressionG::new(d, COMP_DICT);
    let alphabet = (1usize << COMP_BLOCK) as f64;
    let expected = |p: f64| {
        let q = (1.0 - p) / (alphabet - 1.0);
        g.eval(p) + (alphabet - 1.0) * g.eval(q)
    };
    let p_min = 1.0 / alphabet;
    if lower >= expected(p_min) {
        return Ok(1.0);
    }
    if lower <= 0.0 {
        return Ok(0.0);
    }
    let p = bisect_decreasing(expected, lower, p_min, 1.0);
    Ok((-p.log2() / COMP_BLOCK as f64).clamp(0.0, 1.0))
}

/// G(z) = (1/K) sum_{t=Q+1}^{d} sum_{u=1}^{t} log2(u) F(z, t, u), with the
/// double sum regrouped by `u` so each evaluation is O(d).
struct CompressionG {
    /// log2(u) * #{t : u < t, Q < t <= d}, indexed by u.
    inner: Vec<f64>,
    /// log2(t) for the u = t terms, t = Q+1..=d.
    diag_from: usize,
    log2: Vec<f64>,
    k: f64,
}

impl CompressionG {
    fn new(d: usize, q: usize) -> Self {
        let log2: Vec<f64> = (0..=d)
            .map(|u| if u == 0 { 0.0 } else { (u as f64).log2() })
            .collect();
        let inner = (0..d)
            .map(|u| {
                if u == 0 {
                    0.0
                } else {
                    log2[u] * (d - u.max(q)) as f64
                }
            })
            .collect();
        CompressionG {
            inner,
            diag_from: q + 1,
            log2,
            k: (d - q) as f64,
        }
    }

    fn eval(&self, z: f64) -> f64 {
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let r = 1.0 - z;
        let d = self.log2.len() - 1;
        let mut acc = 0.0;
        let mut w = 1.0; // (1 - z)^(u - 1)
        for u in 1..=d {
            if u < d {
                acc += self.inner[u] * z * z * w;
            }
            if u >= self.diag_from {
                acc += self.log2[u] * z * w;
            }
            w *= r;
            if w < 1e-300 {
                break;
            }
        }
        acc / self.k
    }
}

/// Binary-track estimate for one estimator, bits/bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitEstimates {
    pub collision: f64,
    pub markov: f64,
    pub compression: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    /// Minimum of the four estimates, bits/sample.
    pub min_entropy: f64,
    pub mcv: f64,
    pub collision: f64,
    pub markov: f64,
    pub compression: f64,
    pub sample_count: usize,
    /// Distinct symbols observed; every estimate is at most its log2.
    pub alphabet_size: usize,
    /// Factor used to scale the binary estimates to bits/sample.
    pub bits_per_sample: u32,
    pub per_bit: BitEstimates,
    /// Collision bound could not be inverted; full entropy was assumed.
    pub collision_fallback: bool,
}

/// Number of distinct symbols present in the stream.
pub fn observed_alphabet(samples: &[u8]) -> usize {
    let mut seen = [false; 256];
    samples.iter().for_each(|&s| seen[s as usize] = true);
    seen.iter().filter(|&&x| x).count()
}

/// Scale a bits-per-bit estimate to bits per sample and apply the cap.
fn per_sample(stream: &SampleStream, h_bit: f64) -> f64 {
    let cap = (observed_alphabet(&stream.samples).max(1) as f64).log2();
    (h_bit * stream.bits_per_sample() as f64).min(cap)
}

pub fn mcv_estimate(stream: &SampleStream) -> Result<f64> {
    mcv_samples(&stream.samples)
}

pub fn collision_estimate(stream: &SampleStream) -> Result<f64> {
    require("collision", MIN_SAMPLES, stream.len(), "samples")?;
    let (h, _) = collision_bits(&stream.to_bits())?;
    Ok(per_sample(stream, h))
}

pub fn markov_estimate(stream: &SampleStream) -> Result<f64> {
    require("markov", MIN_SAMPLES, stream.len(), "samples")?;
    Ok(per_sample(stream, markov_bits(&stream.to_bits())?))
}

pub fn compression_estimate(stream: &SampleStream) -> Result<f64> {
    Ok(per_sample(stream, compression_bits(&stream.to_bits())?))
}

/// Every estimator plus their minimum.
pub fn full_report(stream: &SampleStream) -> Result<EntropyReport> {
    require("mcv", MIN_SAMPLES, stream.len(), "samples")?;
    let width = stream.bits_per_sample();
    let bits = stream.to_bits();
    require("compression", MIN_COMPRESSION_BITS, bits.len(), "bits")?;

    let ((mcv, markov), (collision, compression)) = rayon::join(
        || rayon::join(|| mcv_samples(&stream.samples), || markov_bits(&bits)),
        || rayon::join(|| collision_bits(&bits), || compression_bits(&bits)),
    );
    let (mcv, markov, (collision, fallback), compression) =
        (mcv?, markov?, collision?, compression?);

    let per_bit = BitEstimates {
        collision,
        markov,
        compression,
    };
    let fields = [
        mcv,
        per_sample(stream, collision),
        per_sample(stream, markov),
        per_sample(stream, compression),
    ];
    Ok(EntropyReport {
        min_entropy: fields.into_iter().fold(f64::INFINITY, f64::min),
        mcv: fields[0],
        collision: fields[1],
        markov: fields[2],
        compression: fields[3],
        sample_count: stream.len(),
        alphabet_size: observed_alphabet(&stream.samples),
        bits_per_sample: width,
        per_bit,
        collision_fallback: fallback,
    })
}

impl EntropyReport {
    /// Plain-text table with one row per report.
    pub fn table(rows: &[(&str, &EntropyReport)]) -> String {
        let mut out = format!(
            "{:<20} {:>12} {:>10} {:>15} {:>12} {:>17}\n",
            "", "Min-Entropy", "MCV Est.", "Collision Est.", "Markov Est.", "Compression Est."
        );
        for (name, r) in rows {
            out += &format!(
                "{:<20} {:>12.4} {:>10.4} {:>15.4} {:>12.4} {:>17.4}\n",
                name, r.min_entropy, r.mcv, r.collision, r.markov, r.compression
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coin_bits(n: usize, p_one: f64, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_bool(p_one) as u8).collect()
    }

    #[test]
    fn mcv_formula() {
        let mut s = vec![0u8; 750_000];
        s.extend(std::iter::repeat_n(1u8, 250_000));
        let h = mcv_samples(&s).unwrap();
        assert!((h - 0.412893).abs() < 1e-6, "{h}");
        assert_eq!(mcv_samples(&[7u8; 10_000]).unwrap(), 0.0);
        assert!(matches!(
            mcv_samples(&[0u8; 999]),
            Err(Error::StreamTooShort { needed: 1000, .. })
        ));
    }

    #[test]
    fn mcv_balanced_coin() {
        let h = mcv_samples(&coin_bits(1_000_000, 0.5, 1)).unwrap();
        assert!((h - 1.0).abs() < 0.02, "{h}");
    }

    #[test]
    fn collision_mean_matches_closed_form() {
        // Binary case: P(t = 2) = p² + q², else t = 3, so E[t] = 2 + 2pq.
        for p in [0.5, 0.55, 0.7, 0.9, 0.99, 0.999] {
            let q = 1.0 - p;
            assert!(
                (collision_mean(p) - (2.0 + 2.0 * p * q)).abs() < 1e-9,
                "p={p}"
            );
        }
    }

    #[test]
    fn collision_cases() {
        let (h, fb) = collision_bits(&vec![1u8; 10_000]).unwrap();
        assert!(h < 0.01 && !fb);
        let (h, _) = collision_bits(&coin_bits(1_000_000, 0.5, 2)).unwrap();
        assert!((h - 1.0).abs() < 0.1, "{h}");
        let (h, _) = collision_bits(&coin_bits(1_000_000, 0.9, 3)).unwrap();
        assert!(h < 0.6, "{h}");
    }

    #[test]
    fn markov_cases() {
        let alt: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
        assert!(markov_bits(&alt).unwrap() < 0.01);
        assert!(markov_bits(&vec![0u8; 10_000]).unwrap() < 0.01);
        let h = markov_bits(&coin_bits(1_000_000, 0.5, 4)).unwrap();
        assert!((h - 1.0).abs() < 0.1, "{h}");
    }

    #[test]
    fn compression_short_stream_names_minimum() {
        assert_eq!(
            compression_bits(&[0u8; 5000]),
            Err(Error::StreamTooShort {
                estimator: "compression",
                needed: MIN_COMPRESSION_BITS,
                got: 5000,
                unit: "bits",
            })
        );
    }

    #[test]
    fn compression_cases() {
        assert!(compression_bits(&vec![0u8; 1_000_002]).unwrap() < 0.01);
        let h = compression_bits(&coin_bits(1_000_002, 0.5, 5)).unwrap();
        assert!((0.8..=1.0).contains(&h), "{h}");
    }

    #[test]
    fn repeated_byte_scores_zero() {
        let r = full_report(&SampleStream::external(vec![0xA5; 200_000])).unwrap();
        assert_eq!(r.alphabet_size, 1);
        assert_eq!([r.mcv, r.collision, r.markov, r.compression], [0.0; 4]);
        // the bit-level view alone does not see the repetition
        assert!(r.per_bit.markov > 0.1);
    }

    #[test]
    fn bisection_hits_tolerance() {
        let p = bisect_decreasing(|x| 1.0 - x, 0.25, 0.0, 1.0);
        assert!((p - 0.75).abs() < 1e-9);
    }

    #[test]
    fn report_min_is_minimum() {
        let stream = SampleStream::external(coin_bits(1_000_000, 0.3, 6));
        let r = full_report(&stream).unwrap();
        let m = r.mcv.min(r.collision).min(r.markov).min(r.compression);
        assert_eq!(r.min_entropy, m);
        assert_eq!(r.alphabet_size, 2);
        for v in [r.mcv, r.collision, r.markov, r.compression] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
