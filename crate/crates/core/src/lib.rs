//! Validity-aware adversarial scenario generation for highway driving
//! policies.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`]: deterministic two-lane highway simulator.
//! * [`validity`]: offline temporal-logic monitor labelling collisions.
//! * [`reward`]: adversarial reward and search fitness.
//! * [`rl`]: value-based learning of adversaries and ego policies.
//! * [`search`]: genetic search over initial conditions.
//! * [`baselines`]: reference test generators.
//! * [`analytics`]: de-duplication and failure-mode clustering.
//! * [`stats`] and [`harness`]: experiment orchestration and reporting.

pub mod analytics;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod sim;
pub mod stats;
pub mod reward;
pub mod rl;
pub mod search;
pub mod validity;

pub use error::{Error, Result};

/// Deterministic child seed for stream `index` of a run seeded with `base`
/// (SplitMix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
