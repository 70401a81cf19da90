//! Zipf(alpha) over a finite key set: precomputed CDF, binary search, and a
//! seeded rank-to-key permutation.

use crate::rng::{substream, SimRng};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Zipf {
    cdf: Vec<f64>,
    keys: Vec<u64>,
}

impl Zipf {
    pub fn new(n: u64, alpha: f64, seed: u64) -> Self {
        assert!(n >= 1);
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for rank in 1..=n {
            acc += (rank as f64).powf(-alpha);
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        let mut keys: Vec<u64> = (0..n).collect();
        keys.shuffle(&mut substream(seed, "zipf_perm"));
        Zipf { cdf, keys }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability mass of rank `r` (1-based).
    pub fn mass(&self, r: usize) -> f64 {
        let lo = if r >= 2 { self.cdf[r - 2] } else { 0.0 };
        self.cdf[r - 1] - lo
    }

    pub fn key_of_rank(&self, r: usize) -> u64 {
        self.keys[r - 1]
    }

    pub fn sample_rank(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) + 1
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        self.key_of_rank(self.sample_rank(rng))
    }
}
