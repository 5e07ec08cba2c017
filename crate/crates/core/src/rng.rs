//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and selected
//! by its 64-bit stream id:
//!
//! | stream id        | consumer                                       |
//! |------------------|------------------------------------------------|
//! | `0`              | ensemble-wide draws (shared batches, SVRG `l`)  |
//! | `1 + i`          | particle `i`: its batches and Gaussian noise   |
//! | `u64::MAX`       | initial ensemble                               |
//! | `u64::MAX - 1`   | diagnostics (reference draws for W₁)           |
//!
//! A particle only ever reads its own stream, so the draws are the same no
//! matter how particles are distributed over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const CONTROL_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = u64::MAX;
pub const DIAGNOSTICS_STREAM: u64 = u64::MAX - 1;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn particle_stream(seed: u64, particle: usize) -> StreamRng {
    stream(seed, 1 + particle as u64)
}

/// Control stream plus one stream per particle.
#[derive(Debug, Clone)]
pub struct Streams {
    pub control: StreamRng,
    pub particles: Vec<StreamRng>,
}

impl Streams {
    pub fn new(seed: u64, particles: usize) -> Self {
        Self {
            control: stream(seed, CONTROL_STREAM),
            particles: (0..particles).map(|i| particle_stream(seed, i)).collect(),
        }
    }
}
