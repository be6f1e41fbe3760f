//! Deterministic per-member seeds.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index` under `base`.
///
/// `base + (index + 1)·φ` (φ the odd golden-ratio constant) is injective in
/// `index` modulo 2^64, and the finalizer is a bijection, so distinct indices
/// always get distinct seeds. Only wrapping integer arithmetic is used.
pub fn seed_fanout(base: u64, index: u64) -> u64 {
    mix(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Base seed of an independent sub-stream, e.g. one per Hurst index.
pub fn substream(base: u64, stream: u64) -> u64 {
    seed_fanout(mix(base ^ 0x5EED_5EED_5EED_5EED), stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn fanout_is_stable_and_collision_free() {
        assert_eq!(seed_fanout(7, 3), seed_fanout(7, 3));
        assert_ne!(seed_fanout(7, 3), seed_fanout(7, 4));
        let seeds: HashSet<u64> = (0..10_000).map(|i| seed_fanout(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        // Fixed reference values pin the mapping across platforms.
        assert_eq!(seed_fanout(0, 0), mix(GOLDEN));
        assert_eq!(mix(0), 0);
    }
}
