//! Five SP 800-22 statistical tests (Frequency, BlockFrequency,
//! CumulativeSums, Runs, LongestRun) and the batch harness that turns
//! per-sequence p-values into the C1..C10 histogram, uniformity p-value
//! and pass proportion.
//!
//! Bit sequences are slices of 0/1 bytes.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{erfc, igamc, normal_cdf};

pub const ALPHA: f64 = 0.01;
pub const MIN_BITS: usize = 100;
pub const MIN_LONGEST_RUN_BITS: usize = 128;
pub const MIN_BLOCK_LEN: usize = 20;
pub const DEFAULT_BLOCK_LEN: usize = 128;
/// Uniformity p-values below this mark a test as failed.
pub const UNIFORMITY_CUTOFF: f64 = 1e-4;

fn require(test: &'static str, needed: usize, got: usize) -> Result<()> {
    if got < needed {
        return Err(Error::StreamTooShort {
            estimator: test,
            needed,
            got,
            unit: "bits",
        });
    }
    Ok(())
}

/// Unpack bytes into bits, most significant bit first.
pub fn bits_from_bytes(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitFormat {
    /// ASCII when the content is only '0', '1' and whitespace.
    Auto,
    Packed,
    Ascii,
}

/// Decode a file's contents into bits.
pub fn parse_bits(content: &[u8], format: BitFormat) -> Result<Vec<u8>> {
    let is_ascii = |c: &[u8]| {
        c.iter().any(|b| matches!(b, b'0' | b'1'))
            && c.iter()
                .all(|b| matches!(b, b'0' | b'1') || b.is_ascii_whitespace())
    };
    let ascii = match format {
        BitFormat::Packed => false,
        BitFormat::Ascii => {
            if !is_ascii(content) {
                return Err(Error::InvalidParameter(
                    "ASCII bit file may contain only '0', '1' and whitespace".into(),
                ));
            }
            true
        }
        BitFormat::Auto => is_ascii(content),
    };
    Ok(if ascii {
        content
            .iter()
            .filter(|b| !b.is_ascii_whitespace())
            .map(|b| b - b'0')
            .collect()
    } else {
        bits_from_bytes(content)
    })
}

/// The statistics with no minimum-length checks, for worked examples on
/// toy inputs.
pub mod unchecked {
    use super::*;

    pub fn frequency(bits: &[u8]) -> f64 {
        let n = bits.len() as f64;
        let sum: i64 = bits.iter().map(|&b| 2 * b as i64 - 1).sum();
        erfc(sum.unsigned_abs() as f64 / (2.0 * n).sqrt())
    }

    pub fn block_frequency(bits: &[u8], m: usize) -> f64 {
        let blocks = bits.len() / m;
        let chi2: f64 = bits
            .chunks_exact(m)
            .map(|blk| {
                let pi = blk.iter().map(|&b| b as usize).sum::<usize>() as f64 / m as f64;
                (pi - 0.5).powi(2)
            })
            .sum::<f64>()
            * 4.0
            * m as f64;
        igamc(blocks as f64 / 2.0, chi2 / 2.0)
    }

    /// Maximum partial-sum excursion.
    pub fn cusum_statistic(bits: &[u8], direction: Direction) -> u64 {
        let step = |&b: &u8| 2 * b as i64 - 1;
        let mut s = 0i64;
        let mut z = 0u64;
        let mut visit = |b: &u8| {
            s += step(b);
            z = z.max(s.unsigned_abs());
        };
        match direction {
            Direction::Forward => bits.iter().for_each(&mut visit),
            Direction::Reverse => bits.iter().rev().for_each(&mut visit),
        }
        z
    }

    pub fn cusum(bits: &[u8], direction: Direction) -> f64 {
        let n = bits.len() as i64;
        let z = cusum_statistic(bits, direction) as i64;
        if z == 0 {
            return 1.0;
        }
        let sqrt_n = (n as f64).sqrt();
        let zf = z as f64;
        // Integer division truncates toward zero, as in the reference code.
        let nz = n / z;
        let term = |a: i64, b: i64| {
            normal_cdf(a as f64 * zf / sqrt_n) - normal_cdf(b as f64 * zf / sqrt_n)
        };
        let sum1: f64 = ((-nz + 1) / 4..=(nz - 1) / 4)
            .map(|k| term(4 * k + 1, 4 * k - 1))
            .sum();
        let sum2: f64 = ((-nz - 3) / 4..=(nz - 1) / 4)
            .map(|k| term(4 * k + 3, 4 * k + 1))
            .sum();
        (1.0 - sum1 + sum2).clamp(0.0, 1.0)
    }

    /// Number of runs (value changes + 1).
    pub fn runs_statistic(bits: &[u8]) -> u64 {
        1 + bits.windows(2).filter(|w| w[0] != w[1]).count() as u64
    }

    pub fn runs(bits: &[u8]) -> f64 {
        let n = bits.len() as f64;
        let pi = bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / n;
        if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
            return 0.0;
        }
        let v = runs_statistic(bits) as f64;
        let spread = pi * (1.0 - pi);
        erfc((v - 2.0 * n * spread).abs() / (2.0 * (2.0 * n).sqrt() * spread))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

pub fn frequency_test(bits: &[u8]) -> Result<f64> {
    require("frequency", MIN_BITS, bits.len())?;
    Ok(unchecked::frequency(bits))
}

pub fn block_frequency_test(bits: &[u8], m: usize) -> Result<f64> {
    require("block_frequency", MIN_BITS, bits.len())?;
    if m < MIN_BLOCK_LEN || m > bits.len() {
        return Err(Error::InvalidParameter(format!(
            "block length {m} must be in {MIN_BLOCK_LEN}..={}",
            bits.len()
        )));
    }
    Ok(unchecked::block_frequency(bits, m))
}

pub fn cusum_test(bits: &[u8], direction: Direction) -> Result<f64> {
    require("cumulative_sums", MIN_BITS, bits.len())?;
    Ok(unchecked::cusum(bits, direction))
}

pub fn runs_test(bits: &[u8]) -> Result<f64> {
    require("runs", MIN_BITS, bits.len())?;
    Ok(unchecked::runs(bits))
}

struct LongestRunTable {
    block: usize,
    /// Upper edge of the lowest category; categories are
    /// `<= low`, `low+1`, ..., `>= low + probs.len() - 1`.
    low: usize,
    probs: &'static [f64],
}

const LONGEST_RUN_8: LongestRunTable = LongestRunTable {
    block: 8,
    low: 1,
    probs: &[0.21484375, 0.3671875, 0.23046875, 0.1875],
};
const LONGEST_RUN_128: LongestRunTable = LongestRunTable {
    block: 128,
    low: 4,
    probs: &[
        0.1174035788,
        0.242955959,
        0.249363483,
        0.17517706,
        0.102701071,
        0.112398847,
    ],
};
const LONGEST_RUN_10000: LongestRunTable = LongestRunTable {
    block: 10000,
    low: 10,
    probs: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

fn longest_run_table(n: usize) -> &'static LongestRunTable {
    if n < 6272 {
        &LONGEST_RUN_8
    } else if n < 750_000 {
        &LONGEST_RUN_128
    } else {
        &LONGEST_RUN_10000
    }
}

/// Per-category counts of the longest run of ones in each block.
pub fn longest_run_counts(bits: &[u8]) -> Vec<u64> {
    let t = longest_run_table(bits.len());
    let k = t.probs.len();
    let mut nu = vec![0u64; k];
    for blk in bits.chunks_exact(t.block) {
        let (mut best, mut cur) = (0usize, 0usize);
        for &b in blk {
            cur = if b == 1 { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        let cat = best.clamp(t.low, t.low + k - 1) - t.low;
        nu[cat] += 1;
    }
    nu
}

pub fn longest_run_test(bits: &[u8]) -> Result<f64> {
    require("longest_run", MIN_LONGEST_RUN_BITS, bits.len())?;
    let t = longest_run_table(bits.len());
    let blocks = (bits.len() / t.block) as f64;
    let nu = longest_run_counts(bits);
    let chi2: f64 = nu
        .iter()
        .zip(t.probs)
        .map(|(&v, &p)| (v as f64 - blocks * p).powi(2) / (blocks * p))
        .sum();
    Ok(igamc((t.probs.len() - 1) as f64 / 2.0, chi2 / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StsTest {
    Frequency,
    BlockFrequency,
    CumulativeSumsForward,
    CumulativeSumsReverse,
    Runs,
    LongestRun,
}

impl StsTest {
    pub const ALL: [StsTest; 6] = [
        StsTest::Frequency,
        StsTest::BlockFrequency,
        StsTest::CumulativeSumsForward,
        StsTest::CumulativeSumsReverse,
        StsTest::Runs,
        StsTest::LongestRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StsTest::Frequency => "Frequency",
            StsTest::BlockFrequency => "BlockFrequency",
            StsTest::CumulativeSumsForward => "CumulativeSums (forward)",
            StsTest::CumulativeSumsReverse => "CumulativeSums (reverse)",
            StsTest::Runs => "Runs",
            StsTest::LongestRun => "LongestRun",
        }
    }
}

/// One test's outcome on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub test_name: &'static str,
    /// Two entries (forward, reverse) for CumulativeSums, one otherwise.
    pub p_values: Vec<f64>,
    pub pass: Vec<bool>,
}

impl TestResult {
    fn new(test_name: &'static str, p_values: Vec<f64>) -> Self {
        let pass = p_values.iter().map(|&p| p >= ALPHA).collect();
        TestResult {
            test_name,
            p_values,
            pass,
        }
    }
}

/// Run the five tests on one sequence.
pub fn run_all(bits: &[u8], block_len: usize) -> Result<Vec<TestResult>> {
    Ok(vec![
        TestResult::new("Frequency", vec![frequency_test(bits)?]),
        TestResult::new(
            "BlockFrequency",
            vec![block_frequency_test(bits, block_len)?],
        ),
        TestResult::new(
            "CumulativeSums",
            vec![
                cusum_test(bits, Direction::Forward)?,
                cusum_test(bits, Direction::Reverse)?,
            ],
        ),
        TestResult::new("Runs", vec![runs_test(bits)?]),
        TestResult::new("LongestRun", vec![longest_run_test(bits)?]),
    ])
}

/// Aggregate view of one test across a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub test: &'static str,
    /// C1..C10: counts of p-values in [0, 0.1), ..., [0.9, 1].
    pub histogram: [u64; 10],
    pub uniformity_p: f64,
    pub passed: u64,
    pub total: u64,
    pub pass_ratio: f64,
    /// Minimum acceptable pass proportion for this batch size.
    pub threshold: f64,
    pub proportion_ok: bool,
    pub uniformity_ok: bool,
}

/// Lower edge of the proportion confidence interval for `m` sequences.
pub fn proportion_threshold(m: u64) -> f64 {
    let p = 1.0 - ALPHA;
    p - 3.0 * (p * (1.0 - p) / m as f64).sqrt()
}

/// Chi-square uniformity p-value of a decile histogram (9 degrees of freedom).
pub fn uniformity_p_value(histogram: &[u64; 10]) -> f64 {
    let total: u64 = histogram.iter().sum();
    let expected = total as f64 / 10.0;
    let chi2: f64 = histogram
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    igamc(4.5, chi2 / 2.0)
}

pub fn decile_histogram(p_values: &[f64]) -> [u64; 10] {
    let mut h = [0u64; 10];
    for &p in p_values {
        h[((p * 10.0) as usize).min(9)] += 1;
    }
    h
}

/// Summary from already-binned counts.
pub fn summarize_counts(test: &'static str, histogram: [u64; 10], passed: u64) -> TestSummary {
    let total: u64 = histogram.iter().sum();
    let uniformity_p = uniformity_p_value(&histogram);
    let pass_ratio = passed as f64 / total as f64;
    let threshold = proportion_threshold(total);
    TestSummary {
        test,
        histogram,
        uniformity_p,
        passed,
        total,
        pass_ratio,
        threshold,
        proportion_ok: pass_ratio >= threshold,
        uniformity_ok: uniformity_p >= UNIFORMITY_CUTOFF,
    }
}

pub fn summarize(test: &'static str, p_values: &[f64]) -> TestSummary {
    let passed = p_values.iter().filter(|&&p| p >= ALPHA).count() as u64;
    summarize_counts(test, decile_histogram(p_values), passed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub sequences: usize,
    pub block_frequency_m: usize,
    pub alpha: f64,
    pub tests: Vec<TestSummary>,
    pub passed: bool,
}

/// Run every test on every sequence and aggregate.
pub fn run_batch(streams: &[Vec<u8>], block_len: usize) -> Result<BatchReport> {
    if streams.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_stream: Vec<[f64; 6]> = streams
        .par_iter()
        .map(|bits| {
            let r = run_all(bits, block_len)?;
            Ok([
                r[0].p_values[0],
                r[1].p_values[0],
                r[2].p_values[0],
                r[2].p_values[1],
                r[3].p_values[0],
                r[4].p_values[0],
            ])
        })
        .collect::<Result<_>>()?;

    let tests: Vec<TestSummary> = StsTest::ALL
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let ps: Vec<f64> = per_stream.iter().map(|row| row[i]).collect();
            summarize(t.name(), &ps)
        })
        .collect();
    let passed = tests.iter().all(|t| t.proportion_ok && t.uniformity_ok);
    Ok(BatchReport {
        sequences: streams.len(),
        block_frequency_m: block_len,
        alpha: ALPHA,
        tests,
        passed,
    })
}

impl BatchReport {
    /// Text table in the usual C1..C10 / P-VALUE / PROPORTION layout.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for i in 1..=10 {
            out += &format!("{:>5}", format!("C{i}"));
        }
        out += &format!("{:>11} {:>12}  TEST\n", "P-VALUE", "PROPORTION");
        for t in &self.tests {
            for c in t.histogram {
                out += &format!("{c:>5}");
            }
            let flag = if t.proportion_ok && t.uniformity_ok {
                ' '
            } else {
                '*'
            };
            out += &format!(
                "{:>11.6} {:>12}{flag} {}\n",
                t.uniformity_p,
                format!("{}/{}", t.passed, t.total),
                t.test
            );
        }
        out
    }
}
