//! Reproducible random streams.
//!
//! Every replication owns independent ChaCha8 streams keyed by
//! `(base_seed, replication, purpose)`. ChaCha is counter based, so a stream
//! does not depend on how many other streams were drawn or on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Data simulation and Monte Carlo smoothing never
/// share a stream, so changing the particle count leaves the data untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data = 0,
    Smoother = 1,
    Aux = 2,
}

pub fn stream(base_seed: u64, replication: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replication.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}
