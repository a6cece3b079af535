//! Seedable 64-bit content hashing.
//!
//! Everything that needs a stable content fingerprint across runs and
//! builds (counter caches, prompt prefix hashes, feature hashing in the
//! built-in encoder) goes through FNV-1a rather than `DefaultHasher` so
//! that golden outputs never depend on the standard library's hasher.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_seeded(FNV_OFFSET, bytes)
}

/// FNV-1a with an explicit starting state, used to derive independent
/// hash families (bucket vs. sign) from one function.
pub fn fnv1a_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed ^ FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Content hash of a string, as used by counter/encoder caches and
/// prompt prefix fingerprints.
pub fn content_hash(text: &str) -> u64 {
    fnv1a(text.as_bytes())
}

/// Finalizer that avalanches all 64 bits. FNV's low bits are weak;
/// anything deriving buckets or sign bits must mix first.
pub fn mix(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_across_calls() {
        assert_eq!(
            content_hash("tool attention"),
            content_hash("tool attention")
        );
        assert_ne!(content_hash("a"), content_hash("b"));
    }

    #[test]
    fn seeds_give_independent_families() {
        assert_ne!(fnv1a_seeded(1, b"x"), fnv1a_seeded(2, b"x"));
    }
}
