//! Seeded, splittable random streams.
//!
//! Every random decision in the crate draws from a ChaCha stream keyed by a
//! user seed plus a stream id (a frame id, a segment index, ...), so results
//! do not depend on call order elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
