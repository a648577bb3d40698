//! Deterministic random streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream keyed by
//! `(seed, purpose, episode, index)`. Streams never share state, so the order
//! in which episodes or axis points execute cannot change any output, and two
//! runs that share a seed see identical odometry noise whether or not
//! localization is enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u64)]
pub enum Purpose {
    WorldLayout = 1,
    WorldDescriptors = 2,
    GalleryCapture = 3,
    GlobalProjection = 4,
    OdometryBias = 5,
    OdometryStep = 6,
    Observation = 7,
    Ransac = 8,
    Test = 99,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a key tuple into a single 64-bit value.
pub fn mix_key(seed: u64, purpose: Purpose, episode: u64, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ episode.rotate_left(17));
    splitmix64(h ^ index.rotate_left(41))
}

/// Opens the stream for `(seed, purpose, episode, index)`.
pub fn stream(seed: u64, purpose: Purpose, episode: u64, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    let mut h = mix_key(seed, purpose, episode, index);
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&h.to_le_bytes());
        h = splitmix64(h);
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(episode);
    rng
}
