//! Deterministic random streams. Every consumer draws from its own ChaCha
//! stream keyed by `(seed, purpose, index)` so runs never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Table = 1,
    Init = 2,
    Shuffle = 3,
    Split = 4,
    Gradcheck = 5,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index);
    rng
}
