use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent, reproducible random stream `stream` under `seed`.
///
/// Every sub-task (per-sample draws, noise, selection) gets its own stream so
/// results do not depend on scheduling or thread count.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Named stream ids, kept distinct from per-sample stream ranges.
pub mod streams {
    pub const ANGLES: u64 = 1 << 40;
    pub const CHANNELS: u64 = 2 << 40;
    pub const SELECTION: u64 = 3 << 40;
    pub const NOISE: u64 = 4 << 40;
    pub const INIT: u64 = 5 << 40;
    pub const GENERATE: u64 = 6 << 40;
    pub const GROUND_TRUTH: u64 = 7 << 40;
}
