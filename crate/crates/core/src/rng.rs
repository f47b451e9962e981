//! Split Gaussian streams keyed by `(master_seed, stream_id)`.
//!
//! Each stream is a ChaCha8 keystream: the master seed fixes the key and the
//! stream id selects the ChaCha stream (nonce), so replicas and Wiener
//! processes draw from disjoint keystreams without coordination.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream channels. A replica's stream id is `replica << 8 | channel`.
pub mod channel {
    pub const SLOW: u64 = 0;
    pub const FAST: u64 = 1;
    pub const FROZEN: u64 = 2;
    pub const CHECK: u64 = 3;
    pub const FBAR: u64 = 4;
    pub const FIELDS: u64 = 5;
}

pub fn stream_id(replica: u64, channel: u64) -> u64 {
    (replica << 8) | (channel & 0xff)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self { master_seed, stream_id, rng }
    }

    pub fn for_replica(master_seed: u64, replica: u64, channel: u64) -> Self {
        Self::new(master_seed, stream_id(replica, channel))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream sharing the master seed, e.g. for nested sub-simulations.
    pub fn sibling(&self, stream_id: u64) -> Self {
        Self::new(self.master_seed, stream_id)
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.rng.sample(StandardNormal);
        }
    }

    pub fn gaussian_increments(&mut self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill_gaussian(&mut out);
        out
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_request() {
        assert!(RngStream::new(1, 2).gaussian_increments(0).is_empty());
    }

    #[test]
    fn same_key_same_sequence() {
        let a = RngStream::new(42, 7).gaussian_increments(64);
        let b = RngStream::new(42, 7).gaussian_increments(64);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = RngStream::new(42, 7).gaussian_increments(16);
        let b = RngStream::new(42, 8).gaussian_increments(16);
        let c = RngStream::new(43, 7).gaussian_increments(16);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let n = 1_000_000;
        let xs = RngStream::new(2024, 0).gaussian_increments(n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn independent_streams_uncorrelated() {
        let n = 200_000;
        let a = RngStream::new(5, 0).gaussian_increments(n);
        let b = RngStream::new(5, 1).gaussian_increments(n);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }
}
