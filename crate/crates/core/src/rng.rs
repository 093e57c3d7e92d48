//! Reproducible random streams.
//!
//! Every stochastic routine takes a 64-bit root seed. Independent workers
//! (trajectories, pairs, batch rows) draw from `stream(root, index)`: a
//! ChaCha8 generator whose key is expanded from `root` by
//! `rand_core::SeedableRng::seed_from_u64` (PCG32 expansion) and whose
//! 64-bit stream id is `index`. ChaCha is counter based, so stream `i` is
//! the same sequence no matter how work is scheduled across threads.
//!
//! Nested derivations (one experiment spawning several ensembles) go
//! through [`sub_seed`], a SplitMix64 mix of the root and a label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `index` under `root`.
pub fn stream(root: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent root seed for a labelled sub-experiment.
pub fn sub_seed(root: u64, label: u64) -> u64 {
    splitmix64(root ^ splitmix64(label))
}

/// Fill `out` with independent standard normal draws.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
