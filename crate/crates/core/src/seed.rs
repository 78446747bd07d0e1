//! Per-stage seeds derived from the single configured seed.

/// Mixes `base` with a stage tag and a domain name. Stable across
/// platforms and releases (FNV-1a followed by a SplitMix64 finalizer).
pub fn derive(base: u64, stage: &str, domain: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes().chain([0xff]).chain(domain.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(base ^ h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::derive;

    #[test]
    fn stable_and_distinct() {
        assert_eq!(
            derive(7, "mapping", "blocks"),
            derive(7, "mapping", "blocks")
        );
        assert_ne!(derive(7, "mapping", "blocks"), derive(7, "dev", "blocks"));
        assert_ne!(
            derive(7, "mapping", "blocks"),
            derive(8, "mapping", "blocks")
        );
        assert_ne!(derive(7, "ab", "c"), derive(7, "a", "bc"));
    }
}
