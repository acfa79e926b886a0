//! Robust reinforcement learning under the adjacent R-contamination uncertainty set.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: tabular MDPs, Q-tables, greedy extraction and the MDP text format.
//! * [`env`]: gridworlds, cart-pole, pendulum and the test-time perturbation wrappers.
//! * [`robust`]: uncertainty sets, support functions, robust Bellman backups and
//!   the exact robust value-iteration oracle.
//! * [`neighbors`]: neighbouring-set tables and their sample-based estimate.
//! * [`sampling`] / [`replay`]: single- and double-agent (state-sharing) sampling.
//! * [`tabular`]: Q-Learning, Robust-Q, ARQ-Learning and PRQ-Learning.
//! * [`nn`]: a small dense network with manual backprop, Adam and gradient checks.
//! * [`deep`]: DQN / R-DQN / PR-DQN and DDPG / R-DDPG / PR-DDPG.
//!
//! Everything is expressed in *costs*: agents minimise discounted cost and
//! environments that are conventionally reward based report `cost = -reward`.

pub mod deep;
pub mod env;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod neighbors;
pub mod nn;
pub mod replay;
pub mod robust;
pub mod sampling;
pub mod tabular;

pub use error::{Error, Result};

/// Random generator used everywhere a seed must reproduce a run bit-for-bit.
pub type Prng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn prng(seed: u64) -> Prng {
    use rand::SeedableRng;
    Prng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a base seed and a label.
///
/// SplitMix64 finaliser over `base` and `stream`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
