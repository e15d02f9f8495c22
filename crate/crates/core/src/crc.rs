//! CRC-CCITT-16 and the SRAM-to-seed extraction pipeline.
//!
//! Parameters: polynomial `x^16 + x^12 + x^5 + 1` (0x1021), MSB-first,
//! initial register 0xFFFF, no reflection, no final XOR. This is the
//! variant usually catalogued as CRC-16/CCITT-FALSE.
//!
//! The hot path is table-driven; [`crc16_bitwise`] is the bit-serial
//! reference the table is checked against.

use std::fmt;

use crate::error::{Error, Result};

/// Generator polynomial, normal form.
pub const POLY: u16 = 0x1021;

/// Initial register value used by [`crc16`] and [`CrcState::new`].
pub const INIT: u16 = 0xFFFF;

/// Size of the SRAM snapshot in bytes.
pub const SRAM_LEN: usize = 10240;

/// Bytes folded into each 16-bit CRC value.
pub const BLOCK_LEN: usize = 160;

/// Number of CRC blocks in an image.
pub const BLOCKS: usize = SRAM_LEN / BLOCK_LEN;

/// Seed length in bytes.
pub const SEED_LEN: usize = 64;

const TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut j = 0;
        while j < 8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ POLY
            } else {
                crc << 1
            };
            j += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// Running CRC register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CrcState(u16);

impl CrcState {
    /// Register at the configured initial value (0xFFFF).
    pub const fn new() -> Self {
        CrcState(INIT)
    }

    /// Register at an arbitrary initial value. Init 0x0000 makes the map
    /// linear over GF(2).
    pub const fn with_init(init: u16) -> Self {
        CrcState(init)
    }

    pub const fn register(self) -> u16 {
        self.0
    }

    /// Advance the register by one byte (eight MSB-first division steps).
    #[inline]
    #[must_use]
    pub fn update(self, byte: u8) -> Self {
        let idx = ((self.0 >> 8) as u8 ^ byte) as usize;
        CrcState((self.0 << 8) ^ TABLE[idx])
    }

    #[must_use]
    pub fn update_slice(self, data: &[u8]) -> Self {
        data.iter().fold(self, |s, &b| s.update(b))
    }

    pub const fn finalize(self) -> u16 {
        self.0
    }
}

impl Default for CrcState {
    fn default() -> Self {
        Self::new()
    }
}

pub fn crc16_init() -> CrcState {
    CrcState::new()
}

pub fn crc16_update(state: CrcState, byte: u8) -> CrcState {
    state.update(byte)
}

/// CRC of a whole block from the standard initial register.
pub fn crc16(block: &[u8]) -> u16 {
    CrcState::new().update_slice(block).finalize()
}

pub fn crc16_with_init(init: u16, block: &[u8]) -> u16 {
    CrcState::with_init(init).update_slice(block).finalize()
}

/// Bit-serial reference: one polynomial-division step per input bit.
pub const fn crc16_bitwise(init: u16, data: &[u8]) -> u16 {
    let mut reg = init;
    let mut i = 0;
    while i < data.len() {
        let byte = data[i];
        let mut bit = 8;
        while bit > 0 {
            bit -= 1;
            let feedback = ((reg >> 15) as u8 ^ (byte >> bit)) & 1;
            reg <<= 1;
            if feedback != 0 {
                reg ^= POLY;
            }
        }
        i += 1;
    }
    reg
}

/// A 10240-byte power-on SRAM snapshot.
#[derive(Clone, PartialEq, Eq)]
pub struct SramImage(Box<[u8; SRAM_LEN]>);

impl SramImage {
    pub fn zeroed() -> Self {
        SramImage(Box::new([0u8; SRAM_LEN]))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; SRAM_LEN] = bytes.try_into().map_err(|_| Error::MalformedImage {
            expected: SRAM_LEN,
            got: bytes.len(),
        })?;
        Ok(SramImage(Box::new(arr)))
    }

    pub fn as_bytes(&self) -> &[u8; SRAM_LEN] {
        &self.0
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8; SRAM_LEN] {
        &mut self.0
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[u8]> {
        self.0.chunks_exact(BLOCK_LEN)
    }
}

impl fmt::Debug for SramImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ones: u32 = self.0.iter().map(|b| b.count_ones()).sum();
        f.debug_struct("SramImage").field("ones", &ones).finish()
    }
}

/// The 64-byte generator seed produced from an SRAM image.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; SEED_LEN]);

impl Seed {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; SEED_LEN] = bytes.try_into().map_err(|_| Error::MalformedSeed {
            expected: SEED_LEN,
            got: bytes.len(),
        })?;
        Ok(Seed(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SEED_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

/// The 64 per-block CRC values, big-endian, concatenated (128 bytes).
pub fn block_digests(image: &SramImage) -> [u8; 2 * BLOCKS] {
    let mut out = [0u8; 2 * BLOCKS];
    for (chunk, block) in out.chunks_exact_mut(2).zip(image.blocks()) {
        chunk.copy_from_slice(&crc16(block).to_be_bytes());
    }
    out
}

/// Collapse an SRAM image into a 64-byte seed.
///
/// Each 160-byte block is reduced to its CRC; the 128 bytes of CRC values
/// are then folded in half by XOR so every input byte reaches the seed.
pub fn extract_seed(image: &SramImage) -> Seed {
    let digests = block_digests(image);
    let (lo, hi) = digests.split_at(SEED_LEN);
    let mut seed = [0u8; SEED_LEN];
    for ((s, a), b) in seed.iter_mut().zip(lo).zip(hi) {
        *s = a ^ b;
    }
    Seed(seed)
}

pub fn extract_seed_from_bytes(bytes: &[u8]) -> Result<Seed> {
    SramImage::from_bytes(bytes).map(|img| extract_seed(&img))
}

/// Executable checks of the error-detection properties that make the CRC a
/// reasonable mixing function.
pub mod analysis {
    use super::crc16_with_init;

    /// Syndrome contributed by each bit position of a `len_bits` message
    /// (MSB-first, `len_bits` a multiple of 8). With init 0 the CRC is
    /// linear, so the syndrome of any error pattern is the XOR of these.
    pub fn bit_syndromes(len_bits: usize) -> Vec<u16> {
        assert!(
            len_bits.is_multiple_of(8),
            "message length must be whole bytes"
        );
        let mut msg = vec![0u8; len_bits / 8];
        (0..len_bits)
            .map(|bit| {
                msg[bit / 8] = 0x80 >> (bit % 8);
                let s = crc16_with_init(0, &msg);
                msg[bit / 8] = 0;
                s
            })
            .collect()
    }

    /// Number of weight-`weight` error patterns in a `len_bits` message that
    /// leave the CRC unchanged. Exhaustive; cost is C(len_bits, weight).
    pub fn count_undetected(len_bits: usize, weight: usize) -> u64 {
        let syn = bit_syndromes(len_bits);
        let mut count = 0;
        walk(&syn, 0, weight, 0, &mut count);
        count
    }

    fn walk(syn: &[u16], start: usize, left: usize, acc: u16, count: &mut u64) {
        if left == 0 {
            if acc == 0 {
                *count += 1;
            }
            return;
        }
        for i in start..=syn.len() - left {
            walk(syn, i + 1, left - 1, acc ^ syn[i], count);
        }
    }
}
