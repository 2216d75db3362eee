use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic source of randomness identified by `(seed, stream)`.
///
/// Equal pairs reproduce identical draw sequences; distinct stream ids select
/// independent ChaCha streams under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededSampler {
    pub seed: u64,
    pub stream: u64,
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two words into a well-mixed key.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b.wrapping_add(0x632B_E59B_D9B4_E019)))
}

impl SeededSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A sampler keyed by this one and `tag`, independent of both this
    /// sampler's stream and of siblings with other tags.
    pub fn derive(&self, tag: u64) -> SeededSampler {
        SeededSampler::new(mix(self.seed, self.stream), tag)
    }

    /// Random halves of `0..n` with sizes `ceil(n/2)` and `floor(n/2)`, each
    /// in ascending order.
    pub fn split_indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if n < 2 {
            return Err(Error::invalid(format!("cannot split {n} rows in half")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut self.rng());
        let first = n.div_ceil(2);
        let mut a = perm[..first].to_vec();
        let mut b = perm[first..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        Ok((a, b))
    }

    /// `floor(fraction * n)` distinct indices drawn uniformly without
    /// replacement, in draw order.
    pub fn subsample_indices(&self, n: usize, fraction: f64) -> Result<Vec<usize>> {
        let k = subsample_size(n, fraction)?;
        Ok(self.sample_without_replacement(n, k))
    }

    /// `k` distinct values from `0..n`, in draw order.
    pub fn sample_without_replacement(&self, n: usize, k: usize) -> Vec<usize> {
        index::sample(&mut self.rng(), n, k).into_vec()
    }

    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut self.rng());
        perm
    }
}

pub(crate) fn subsample_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "sample fraction {fraction} outside (0, 1]"
        )));
    }
    let k = (fraction * n as f64).floor() as usize;
    if k < 2 {
        return Err(Error::invalid(format!(
            "sample fraction {fraction} of {n} rows leaves fewer than 2 rows"
        )));
    }
    Ok(k)
}
