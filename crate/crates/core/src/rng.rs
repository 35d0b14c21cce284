//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and selected
//! by a 64-bit stream label, so streams never overlap and an agent's draws
//! depend only on its id, never on iteration order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Label of an independent stream within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    /// Decision-policy randomness of one agent.
    Decision(u32),
    /// Detection draws for one agent.
    Detection(u32),
    /// Initial state of one agent.
    Init(u32),
    /// Transparency noise.
    Noise,
}

impl StreamId {
    fn label(self) -> u64 {
        const SHIFT: u32 = 56;
        match self {
            StreamId::Decision(id) => (1 << SHIFT) | id as u64,
            StreamId::Detection(id) => (2 << SHIFT) | id as u64,
            StreamId::Init(id) => (3 << SHIFT) | id as u64,
            StreamId::Noise => 4 << SHIFT,
        }
    }
}

pub fn rng_stream(master_seed: u64, id: StreamId) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id.label());
    rng
}

/// Zero-mean Gaussian draw scaled by `sigma`. Consumes the stream even when
/// `sigma` is zero so that the stream position does not depend on it.
pub fn gaussian(rng: &mut SimRng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}
