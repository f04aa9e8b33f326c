//! Deterministic random streams keyed by `(seed, purpose, index)`.
//!
//! Every consumer of randomness draws from its own ChaCha stream so that,
//! for example, changing the participation schedule never perturbs the
//! model initialization drawn from the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    InitDeepLinear = 1,
    InitTwoLayer = 2,
    Participants = 3,
    SynthFeatures = 4,
    SynthTeacher = 5,
    SynthTargets = 6,
    Partition = 7,
    Perturbation = 8,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & INDEX_MASK));
    rng
}

/// Draws `len` standard-normal values, sampled in `f64` and narrowed to `T`
/// so that `f32` and `f64` runs consume identical streams.
pub fn normals<T: Scalar, R: Rng>(rng: &mut R, len: usize) -> Vec<T> {
    (0..len)
        .map(|_| lit::<T>(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}
