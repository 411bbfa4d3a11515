//! Deterministic random streams.
//!
//! Every stochastic quantity is drawn from ChaCha20 keyed by the run seed,
//! with a separate ChaCha stream id per (scenario, node, purpose). ChaCha is
//! a counter-mode generator, so the draws are identical on every platform and
//! independent of the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. The discriminant is part of the stream id,
/// so reordering variants changes every simulated output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    LegitFading = 1,
    EveFading = 2,
    AliceNoise = 3,
    BobNoise = 4,
    EveNoise = 5,
    LegitShadowing = 6,
    EveShadowing = 7,
    Fixture = 8,
}

pub fn stream(seed: u64, purpose: Purpose, lane: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((lane & 0x00ff_ffff_ffff_ffff) << 8) | purpose as u64);
    rng
}
