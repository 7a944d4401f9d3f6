//! Seedable, counter-based random streams.
//!
//! Every episode draws from its own ChaCha stream selected by
//! `(seed, episode_index)`, so results do not depend on execution order.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn episode_rng(seed: u64, episode: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Samples an index from a probability vector.
///
/// Point masses are returned without consuming randomness, which keeps
/// deterministic policies in deterministic MDPs independent of the stream.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    if let Some(i) = point_mass(probs) {
        return i;
    }
    WeightedIndex::new(probs).expect("probability vector must have positive mass").sample(rng)
}

pub(crate) fn point_mass(probs: &[f64]) -> Option<usize> {
    let mut support = probs.iter().enumerate().filter(|(_, &p)| p > 0.0);
    match (support.next(), support.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}
