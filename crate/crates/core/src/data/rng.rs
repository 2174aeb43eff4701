use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A reproducible random stream: ChaCha8 keyed by `seed`, with `stream_id`
/// selecting one of 2^64 non-overlapping streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Stream for replicate `index` of a family derived from this stream.
    pub fn child(&self, index: u64) -> Self {
        // mixes the family id into the seed so children of different parents never collide
        let seed = self.seed ^ self.stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
        Self { seed, stream_id: index }
    }
}
