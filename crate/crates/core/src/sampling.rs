//! Seedable randomness and the sampling primitives used during forest growth.
//!
//! Every stochastic step in the engine (bootstrap draws, candidate-feature
//! selection, value permutation) runs on [`RngStream`], a xoshiro256++
//! generator seeded through splitmix64. The generator and all derivation
//! rules are spelled out here so that a forest grown from a given seed can
//! be reproduced exactly on any platform, with any worker count, by any
//! other implementation that follows the same conventions:
//!
//! * stream state: four 64-bit words produced by successive splitmix64 steps
//!   starting from the stream seed;
//! * per-tree stream seed: `mix_pair(master_seed, 1 + tree_index)`;
//! * per-(tree, feature) permutation stream seed:
//!   `mix_pair(mix_pair(master_seed ^ PERMUTE_SALT, 1 + tree_index), 1 + feature_index)`;
//! * bounded draws use Lemire's multiply-shift rejection method;
//! * floats are `(x >> 11) * 2^-53`, uniform on [0, 1).

use crate::error::{GroveError, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const PERMUTE_SALT: u64 = 0x7065_726d_7574_6165;

/// splitmix64 step: advances `state` and returns the next output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapses a (seed, index) pair into a new stream seed.
fn mix_pair(seed: u64, index: u64) -> u64 {
    let mut state = seed;
    let z = splitmix64(&mut state);
    state = z ^ index;
    splitmix64(&mut state)
}

/// Deterministic 64-bit generator (xoshiro256++).
#[derive(Debug, Clone)]
pub struct RngStream {
    s: [u64; 4],
}

impl RngStream {
    /// Creates a stream whose state is derived from `seed` via splitmix64.
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let s = [
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
        ];
        RngStream { s }
    }

    /// Stream driving growth of tree `tree_index` in a forest seeded with
    /// `master_seed`.
    pub fn for_tree(master_seed: u64, tree_index: usize) -> Self {
        Self::new(mix_pair(master_seed, 1 + tree_index as u64))
    }

    /// Stream driving the permutation of `feature_index` among the OOB
    /// samples of tree `tree_index` (permutation importance).
    pub fn for_permutation(master_seed: u64, tree_index: usize, feature_index: usize) -> Self {
        let tree_seed = mix_pair(master_seed ^ PERMUTE_SALT, 1 + tree_index as u64);
        Self::new(mix_pair(tree_seed, 1 + feature_index as u64))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform float on [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

/// Bootstrap record for one tree: per-sample draw counts plus the indices
/// never drawn (out-of-bag).
#[derive(Debug, Clone)]
pub struct BagRecord {
    pub inbag_counts: Vec<u32>,
    pub oob_indices: Vec<u32>,
}

impl BagRecord {
    pub fn n_inbag(&self) -> usize {
        self.inbag_counts.iter().map(|&c| c as usize).sum()
    }
}

/// Draws `n` samples with replacement from `0..n`.
pub fn bootstrap(n: usize, rng: &mut RngStream) -> BagRecord {
    let mut inbag_counts = vec![0u32; n];
    for _ in 0..n {
        inbag_counts[rng.below(n as u64) as usize] += 1;
    }
    let oob_indices = inbag_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i as u32)
        .collect();
    BagRecord {
        inbag_counts,
        oob_indices,
    }
}

/// Draws `k` items from `0..n` without replacement (Knuth's Algorithm S):
/// scan `t = 0..n-1` and select `t` with probability
/// `(k - selected) / (n - t)`. Output is ascending by construction.
pub fn sample_without_replacement(n: usize, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if k > n {
        return Err(GroveError::Config(format!(
            "cannot draw {k} items from a population of {n} without replacement"
        )));
    }
    let mut out = Vec::with_capacity(k);
    for t in 0..n {
        let needed = k - out.len();
        if needed == 0 {
            break;
        }
        let remaining = n - t;
        if (remaining as f64) * rng.next_f64() < needed as f64 {
            out.push(t);
        }
    }
    Ok(out)
}

/// Permutes `values` in place (Fisher-Yates, swapping downward).
pub fn permute<T>(values: &mut [T], rng: &mut RngStream) {
    for i in (1..values.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        values.swap(i, j);
    }
}
