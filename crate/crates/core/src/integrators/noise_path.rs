//! Recorded Brownian increments of one coupled path.
//!
//! Binary layout (little endian): magic `SFNP`, `u32` version, `u64`
//! n_macro, substeps, slow_width, fast_width, `f64` dt_macro, dt_micro, then
//! the slow increments (`n_macro * slow_width`) and the fast increments
//! (`n_macro * substeps * fast_width`).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

const MAGIC: &[u8; 4] = b"SFNP";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 8 + 2 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dt_macro: f64,
    dt_micro: f64,
    substeps: usize,
    slow_width: usize,
    fast_width: usize,
    slow: Vec<f64>,
    fast: Vec<f64>,
}

impl NoisePath {
    pub fn new(dt_macro: f64, dt_micro: f64, substeps: usize, slow_width: usize, fast_width: usize) -> Self {
        Self { dt_macro, dt_micro, substeps, slow_width, fast_width, slow: Vec::new(), fast: Vec::new() }
    }

    /// Appends one macro step: `slow_width` slow increments and
    /// `substeps * fast_width` fast increments.
    pub fn push(&mut self, slow: &[f64], fast: &[f64]) -> Result<()> {
        if slow.len() != self.slow_width || fast.len() != self.substeps * self.fast_width {
            return Err(CoreError::NoisePathFormat(format!(
                "step of size ({}, {}) does not match widths ({}, {})",
                slow.len(),
                fast.len(),
                self.slow_width,
                self.substeps * self.fast_width
            )));
        }
        self.slow.extend_from_slice(slow);
        self.fast.extend_from_slice(fast);
        Ok(())
    }

    pub fn n_macro(&self) -> usize {
        self.slow
            .len()
            .checked_div(self.slow_width)
            .unwrap_or_else(|| self.fast.len() / (self.substeps * self.fast_width).max(1))
    }

    pub fn dt_macro(&self) -> f64 {
        self.dt_macro
    }

    pub fn dt_micro(&self) -> f64 {
        self.dt_micro
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn slow_width(&self) -> usize {
        self.slow_width
    }

    pub fn fast_width(&self) -> usize {
        self.fast_width
    }

    /// Slow increments of macro step `n`.
    pub fn slow(&self, n: usize) -> &[f64] {
        &self.slow[n * self.slow_width..(n + 1) * self.slow_width]
    }

    /// All fast increments of macro step `n`, `substeps` rows.
    pub fn fast_block(&self, n: usize) -> &[f64] {
        let len = self.substeps * self.fast_width;
        &self.fast[n * len..(n + 1) * len]
    }

    /// Fast increments of micro step `m` within macro step `n`.
    pub fn fast(&self, n: usize, m: usize) -> &[f64] {
        let start = (n * self.substeps + m) * self.fast_width;
        &self.fast[start..start + self.fast_width]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (self.slow.len() + self.fast.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.n_macro(), self.substeps, self.slow_width, self.fast_width] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.dt_macro.to_le_bytes());
        out.extend_from_slice(&self.dt_micro.to_le_bytes());
        for v in self.slow.iter().chain(&self.fast) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| CoreError::NoisePathFormat(msg.into());
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(CoreError::NoisePathFormat(format!("unsupported version {version}")));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let [n_macro, substeps, slow_width, fast_width] = [0, 1, 2, 3].map(|i| word(i) as usize);
        let dt_macro = f64::from_bits(word(4));
        let dt_micro = f64::from_bits(word(5));
        let n_slow = n_macro.checked_mul(slow_width);
        let n_fast = n_macro.checked_mul(substeps).and_then(|v| v.checked_mul(fast_width));
        let (n_slow, n_fast) = match (n_slow, n_fast) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(bad("size overflow")),
        };
        let body = &bytes[HEADER_LEN..];
        if Some(body.len()) != n_slow.checked_add(n_fast).and_then(|v| v.checked_mul(8)) {
            return Err(bad("payload length does not match header"));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let slow: Vec<f64> = values.by_ref().take(n_slow).collect();
        let fast: Vec<f64> = values.collect();
        Ok(Self { dt_macro, dt_micro, substeps, slow_width, fast_width, slow, fast })
    }
}
