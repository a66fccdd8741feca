use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label, folded into the user seed.
///
/// Each relation gets its own RNG stream so that a relation's sample does not
/// change when other relations are added to or removed from the input.
pub(crate) fn stream_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ hash.rotate_left(17))
}
