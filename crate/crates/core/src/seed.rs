//! Seed derivation. Every random draw in a run is keyed by the master seed
//! plus a purpose tag and an index, so runs are reproducible from one number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream; named in run reports.
pub const GENERATOR_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seeded via seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    ProjectionBasis = 1,
    Rffm = 2,
    Partition = 3,
    ClientOrder = 4,
    RefinePositions = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed for `(master, purpose, index)`.
pub fn derive(master: u64, purpose: Purpose, index: u64) -> u64 {
    let a = splitmix64(master ^ (purpose as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    splitmix64(a ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    rng(derive(master, purpose, index))
}
