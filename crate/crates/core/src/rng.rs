//! Reproducible random streams.
//!
//! Every stochastic step draws from a ChaCha8 generator keyed by the global
//! seed, with the ChaCha stream id derived from a purpose tag and an item id.
//! ChaCha8 is counter-based and its output is identical on every platform, so
//! a run is fully determined by its seed regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Purpose {
    Walk = 1,
    NegativeLabels = 2,
    SplitTriples = 3,
    SplitLabels = 4,
    Synthetic = 5,
    Init = 6,
    Shuffle = 7,
    Corruption = 8,
    LabelSample = 9,
    Classifier = 10,
    GradProbe = 11,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, purpose, item)`.
pub fn stream(seed: u64, purpose: Purpose, item: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ ((purpose as u64) << 48)));
    rng.set_stream(splitmix64(item ^ ((purpose as u64) << 56)));
    rng
}

/// Stream keyed by two item coordinates, e.g. `(entity, walk index)`.
pub fn stream2(seed: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    stream(seed, purpose, splitmix64(a).wrapping_add(b.rotate_left(32)))
}
