//! Counter-style random streams: one ChaCha stream per (seed, purpose, index).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes, kept distinct so no two uses share draws.
pub mod purpose {
    pub const SCENARIO: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const ESTIMATE: u64 = 3;
    pub const CELL: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a label into an independent 64-bit seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut s = seed ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut s);
    splitmix64(&mut s)
}

/// Generator for item `index` of stream family `(seed, purpose)`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, purpose);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
