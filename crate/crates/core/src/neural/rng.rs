use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based stream: the same (seed, layer, step) always yields the same
/// numbers, independent of how many were drawn elsewhere.
pub fn keyed_rng(seed: u64, layer: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&layer.to_le_bytes());
    key[16..24].copy_from_slice(&step.to_le_bytes());
    key[24..].copy_from_slice(b"tlnsrng\0");
    ChaCha8Rng::from_seed(key)
}
