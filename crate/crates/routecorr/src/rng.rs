//! Counter-based seeding for Monte-Carlo draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for a single Monte-Carlo draw. The stream state is a pure
/// function of `(seed, draw)`, so draws can be evaluated in any order, or in
/// parallel, with bit-identical results.
pub fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(draw);
    rng
}
