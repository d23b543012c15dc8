use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a parent seed with a stream of indices (splitmix64 finalizer), so
/// child seeds do not depend on the order in which work items are visited.
pub fn derive_seed(parent: u64, indices: &[u64]) -> u64 {
    let mut h = parent ^ 0x9e37_79b9_7f4a_7c15;
    for &i in indices {
        h = mix(h ^ mix(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
