//! Fortuna generator: AES-256 in counter mode, rekeyed after every request.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes256;
use sha2::{Digest, Sha256};

use crate::crc::Seed;
use crate::error::{Error, Result};

pub const KEY_LEN: usize = 32;
pub const BLOCK_LEN: usize = 16;

/// Largest number of bytes a single request may return.
pub const MAX_REQUEST: usize = 1 << 20;

/// Encrypt `counter` (128-bit big-endian) under `key`.
pub fn keystream_block(key: &[u8; KEY_LEN], counter: u128) -> [u8; BLOCK_LEN] {
    let cipher = Aes256::new(GenericArray::from_slice(key));
    let mut block = GenericArray::from(counter.to_be_bytes());
    cipher.encrypt_block(&mut block);
    block.into()
}

#[derive(Clone, PartialEq, Eq)]
pub struct GeneratorState {
    key: [u8; KEY_LEN],
    counter: u128,
    seeded: bool,
}

impl std::fmt::Debug for GeneratorState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorState")
            .field("counter", &self.counter)
            .field("seeded", &self.seeded)
            .finish_non_exhaustive()
    }
}

impl Default for GeneratorState {
    fn default() -> Self {
        Self::new()
    }
}

impl GeneratorState {
    /// Zero key, zero counter, unseeded.
    pub const fn new() -> Self {
        GeneratorState {
            key: [0; KEY_LEN],
            counter: 0,
            seeded: false,
        }
    }

    /// Fresh generator keyed from an extracted SRAM seed.
    pub fn from_seed(seed: &Seed) -> Self {
        let mut g = Self::new();
        g.reseed(seed.as_bytes())
            .expect("seed is non-empty and counter is fresh");
        g
    }

    /// Restore a state from its raw parts. A non-zero counter marks the
    /// state seeded.
    pub fn from_parts(key: [u8; KEY_LEN], counter: u128) -> Self {
        GeneratorState {
            key,
            counter,
            seeded: counter > 0,
        }
    }

    pub fn key(&self) -> &[u8; KEY_LEN] {
        &self.key
    }

    pub fn counter(&self) -> u128 {
        self.counter
    }

    pub fn is_seeded(&self) -> bool {
        self.seeded
    }

    /// key <- SHA-256(key || material); counter += 1.
    pub fn reseed(&mut self, material: &[u8]) -> Result<()> {
        if material.is_empty() {
            return Err(Error::EmptySeedMaterial);
        }
        let counter = self.counter.checked_add(1).ok_or(Error::CounterOverflow)?;
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(material);
        self.key = h.finalize().into();
        self.counter = counter;
        self.seeded = true;
        Ok(())
    }

    /// `k` raw counter-mode blocks. No rekey; callers wanting Fortuna
    /// semantics use [`pseudo_random_data`](Self::pseudo_random_data).
    pub fn generate_blocks(&mut self, k: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; k * BLOCK_LEN];
        self.write_blocks(&mut out)?;
        Ok(out)
    }

    fn write_blocks(&mut self, out: &mut [u8]) -> Result<()> {
        debug_assert!(out.len().is_multiple_of(BLOCK_LEN));
        if !self.seeded {
            return Err(Error::Unseeded);
        }
        let k = out.len() / BLOCK_LEN;
        if k == 0 {
            return Err(Error::ZeroBlocks);
        }
        let end = self
            .counter
            .checked_add(k as u128)
            .ok_or(Error::CounterOverflow)?;
        let cipher = Aes256::new(GenericArray::from_slice(&self.key));
        for (i, chunk) in out.chunks_exact_mut(BLOCK_LEN).enumerate() {
            chunk.copy_from_slice(&(self.counter + i as u128).to_be_bytes());
            cipher.encrypt_block(GenericArray::from_mut_slice(chunk));
        }
        self.counter = end;
        Ok(())
    }

    /// One request: `n` output bytes, then two more blocks become the new key.
    pub fn pseudo_random_data(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; n];
        self.fill_request(&mut out)?;
        Ok(out)
    }

    fn fill_request(&mut self, out: &mut [u8]) -> Result<()> {
        let n = out.len();
        if n == 0 || n > MAX_REQUEST {
            return Err(Error::RequestSize {
                requested: n,
                max: MAX_REQUEST,
            });
        }
        if !self.seeded {
            return Err(Error::Unseeded);
        }
        let blocks = n.div_ceil(BLOCK_LEN);
        // Check the whole request (output + rekey) fits before emitting anything.
        self.counter
            .checked_add(blocks as u128 + 2)
            .ok_or(Error::CounterOverflow)?;

        let whole = n - n % BLOCK_LEN;
        if whole > 0 {
            self.write_blocks(&mut out[..whole])?;
        }
        if whole < n {
            let mut tail = [0u8; BLOCK_LEN];
            self.write_blocks(&mut tail)?;
            out[whole..].copy_from_slice(&tail[..n - whole]);
        }
        let mut new_key = [0u8; KEY_LEN];
        self.write_blocks(&mut new_key)?;
        self.key = new_key;
        Ok(())
    }

    /// Fill `out` of any length by issuing successive requests of at most
    /// [`MAX_REQUEST`] bytes.
    pub fn fill_bytes(&mut self, out: &mut [u8]) -> Result<()> {
        if out.is_empty() {
            return Err(Error::RequestSize {
                requested: 0,
                max: MAX_REQUEST,
            });
        }
        for chunk in out.chunks_mut(MAX_REQUEST) {
            self.fill_request(chunk)?;
        }
        Ok(())
    }
}
