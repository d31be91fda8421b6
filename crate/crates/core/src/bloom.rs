//! Standard Bloom filter with seeded double hashing.
//!
//! For `m` bits, `k` probes and `n` inserted keys:
//!
//! - fill ratio `ρ = popcount / m`, with `E[ρ] = 1 − (1 − 1/m)^{kn}`
//! - a key chosen independently of the hash seed is a false positive with
//!   probability `ρ^k`
//!
//! Probe positions are `(h1 + i·h2) mod m` for `i = 0..k`, where `h1` and `h2`
//! are the low and high halves of a seeded 128-bit XXH3 hash of the key, and
//! `h2` is forced odd.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128_with_seed;

use crate::error::{param, Error, Result};

const MAGIC: &[u8; 4] = b"LBF1";
const HEADER_LEN: usize = 4 + 8 + 4 + 8 + 8;

/// Size parameters for a Bloom filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub m: u64,
    pub k: u32,
    /// The false positive probability the parameters were sized for, if any.
    pub target_fpp: Option<f64>,
}

impl FilterParams {
    pub fn new(m: u64, k: u32) -> Result<Self> {
        let params = Self { m, k, target_fpp: None };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return param("bit count m must be at least 1");
        }
        if self.k == 0 {
            return param("hash count k must be at least 1");
        }
        if let Some(eps) = self.target_fpp {
            if !(eps > 0.0 && eps < 1.0) {
                return param(format!("target fpp {eps} outside (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn bits_per_key(&self, n: u64) -> f64 {
        self.m as f64 / n as f64
    }
}

/// A bit array of `m` bits probed by `k` seeded hash functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    m: u64,
    k: u32,
    seed: u64,
    inserted_count: u64,
}

impl BloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self> {
        FilterParams::new(m, k)?;
        let words = usize::try_from(m.div_ceil(64))
            .map_err(|_| Error::Parameter(format!("bit count {m} does not fit in memory")))?;
        Ok(Self {
            words: vec![0; words],
            m,
            k,
            seed,
            inserted_count: 0,
        })
    }

    pub fn with_params(params: &FilterParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Self::new(params.m, params.k, seed)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of `insert` calls, counting repeats.
    pub fn inserted_count(&self) -> u64 {
        self.inserted_count
    }

    pub fn params(&self) -> FilterParams {
        FilterParams {
            m: self.m,
            k: self.k,
            target_fpp: None,
        }
    }

    #[inline]
    fn probes(&self, key: &[u8]) -> impl Iterator<Item = u64> {
        let hash = xxh3_128_with_seed(key, self.seed);
        let h1 = hash as u64;
        let h2 = ((hash >> 64) as u64) | 1;
        let m = self.m;
        (0..u64::from(self.k)).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }

    pub fn insert(&mut self, key: &[u8]) {
        let hash = xxh3_128_with_seed(key, self.seed);
        let h1 = hash as u64;
        let h2 = ((hash >> 64) as u64) | 1;
        for i in 0..u64::from(self.k) {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.m;
            self.words[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        self.inserted_count += 1;
    }

    /// True iff every probed bit is set. Never false for an inserted key.
    pub fn contains(&self, key: &[u8]) -> bool {
        self.probes(key)
            .all(|bit| self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0)
    }

    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Fraction of bits set, `popcount / m`.
    pub fn fill_ratio(&self) -> f64 {
        self.popcount() as f64 / self.m as f64
    }

    /// `ρ^k` for the current bit array: the false positive probability for a
    /// key chosen independently of the seed.
    pub fn current_fpp(&self) -> f64 {
        self.fill_ratio().powi(self.k as i32)
    }

    /// Fixed-width little-endian header followed by the bit array, bit `i`
    /// stored in byte `i / 8` at position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let byte_len = self.m.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(HEADER_LEN + byte_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.inserted_count.to_le_bytes());
        out.extend(self.words.iter().flat_map(|w| w.to_le_bytes()).take(byte_len));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing LBF1 filter header".into()));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let m = u64_at(4);
        let k = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let seed = u64_at(16);
        let inserted_count = u64_at(24);
        let mut filter = Self::new(m, k, seed).map_err(|e| Error::Format(e.to_string()))?;
        filter.inserted_count = inserted_count;

        let body = &bytes[HEADER_LEN..];
        if body.len() as u64 != m.div_ceil(8) {
            return Err(Error::Format(format!(
                "bit array holds {} bytes, expected {}",
                body.len(),
                m.div_ceil(8)
            )));
        }
        for (word, chunk) in filter.words.iter_mut().zip(body.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *word = u64::from_le_bytes(buf);
        }
        if m % 64 != 0 {
            let last = filter.words.last().copied().unwrap_or(0);
            if last >> (m % 64) != 0 {
                return Err(Error::Format("padding bits beyond m are set".into()));
            }
        }
        Ok(filter)
    }
}

/// `E[ρ] = 1 − (1 − 1/m)^{kn}`, evaluated without the exponential
/// approximation.
pub fn expected_fill_ratio(n: u64, m: u64, k: u32) -> Result<f64> {
    if m == 0 {
        return param("bit count m must be at least 1");
    }
    let draws = n as f64 * f64::from(k);
    if draws == 0.0 {
        return Ok(0.0);
    }
    if m == 1 {
        return Ok(1.0);
    }
    // 1 - exp(kn · ln(1 - 1/m)) without cancellation
    Ok(-(draws * (-1.0 / m as f64).ln_1p()).exp_m1())
}

/// Expected false positive probability `E[ρ]^k`.
pub fn expected_fpp(n: u64, m: u64, k: u32) -> Result<f64> {
    Ok(expected_fill_ratio(n, m, k)?.powi(k as i32))
}

/// Standard sizing: `m = ⌈n·log₂(1/ε)/ln 2⌉`, `k = round((m/n)·ln 2)`.
pub fn params_for_target(n: u64, target_fpp: f64) -> Result<FilterParams> {
    if n == 0 {
        return param("key count must be at least 1");
    }
    if !(target_fpp > 0.0 && target_fpp < 1.0) {
        return param(format!("target fpp {target_fpp} outside (0, 1)"));
    }
    let m = (n as f64 * (1.0 / target_fpp).log2() / LN_2).ceil().max(1.0) as u64;
    let k = ((m as f64 / n as f64) * LN_2).round().max(1.0) as u32;
    Ok(FilterParams {
        m,
        k,
        target_fpp: Some(target_fpp),
    })
}
