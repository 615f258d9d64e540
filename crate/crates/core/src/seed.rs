//! Counter-based seed derivation.
//!
//! One master seed fans out into independent streams. A stream is named by a
//! [`Stream`] tag plus a short path of counters (client index, trial index,
//! round, ...). The derived value is a SplitMix64 fold over
//! `master, tag, path...`, so the same path always yields the same seed and
//! adding a new stream never perturbs the existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named seed streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Masks = 2,
    Init = 3,
    Dropout = 4,
    Shares = 5,
    Design = 6,
    Proposal = 7,
    Dataset = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for `stream` at `path` under `master`.
pub fn derive(master: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut acc = splitmix64(master ^ splitmix64(stream as u64));
    for &p in path {
        acc = splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    acc
}

/// A ChaCha8 generator for the derived seed.
pub fn rng(master: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, path))
}
