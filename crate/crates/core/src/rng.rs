//! Splittable counter-based random streams.
//!
//! Every random draw in a simulation is addressed by `(seed, module, chunk)`.
//! The key is derived from `(seed, module)` and the chunk index selects an
//! independent ChaCha stream, so chunks can be generated in any order or in
//! parallel and still produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Identifies the pipeline stage that owns a family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Module {
    PairSource = 1,
    Fibre = 2,
    Birefringence = 3,
    DetectorLocal = 4,
    DetectorRemote = 5,
    DarkLocal = 6,
    DarkRemote = 7,
    Background = 8,
    Test = 0xFFFF,
}

/// Root of a family of reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    seed: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Random stream for `chunk` of `module`.
    pub fn stream(&self, module: Module, chunk: u64) -> ChaCha12Rng {
        let mut state = self.seed ^ (module as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for word in key.chunks_exact_mut(8) {
            word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
