//! Key hashing and bucket selection.
//!
//! Keys are hashed with MurmurHash3 (the x64 128-bit variant, keeping the
//! low 64 bits of the result) specialised for a single 8-byte little-endian
//! block. For seeds below `2^32` the output is identical to the reference
//! `MurmurHash3_x64_128` and to `mmh3.hash64(key.to_le_bytes(), seed)[0]`.

const C1: u64 = 0x87c3_7b91_1142_53d5;
const C2: u64 = 0x4cf5_ad43_2745_937f;

#[inline(always)]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Hashes an 8-byte key.
#[inline]
pub fn hash(key: u64, seed: u64) -> u64 {
    let mut h1 = seed;
    let mut h2 = seed;

    // An 8-byte input has no full 16-byte block, only the `k1` tail.
    let k1 = key.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
    h1 ^= k1;

    h1 ^= 8;
    h2 ^= 8;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1.wrapping_add(h2)
}

/// Low `bucket_count_log2` bits of `h`.
#[inline(always)]
pub fn bucket_index(h: u64, bucket_count_log2: u32) -> usize {
    debug_assert!((1..64).contains(&bucket_count_log2));
    (h & ((1u64 << bucket_count_log2) - 1)) as usize
}
