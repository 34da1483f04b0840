//! Per-replica random streams.
//!
//! Every replica owns a ChaCha8 stream keyed by the campaign seed, with the
//! replica id as the stream selector. ChaCha is a counter-mode generator, so
//! the draw for `(seed, replica, step, site)` sits at a fixed place in the
//! replica's stream: draws are consumed step-major, site-minor, in the
//! row-major site order of the box. Results therefore never depend on which
//! thread ran which replica.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ReplicaRng = ChaCha8Rng;

/// Human-readable description recorded in run manifests.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8 keyed by campaign seed, stream = replica id; standard normals by ziggurat, drawn step-major then site-major";

/// Stream for replica `replica` of the campaign seeded by `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[inline(always)]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
