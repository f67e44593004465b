//! Seed fan-out: a child seed is `splitmix64(master ^ fnv1a(path))`, where
//! `path` names the consumer (for example `"fold/svm/3"`). Adding a consumer
//! never shifts the seeds of existing ones.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &str) -> u64 {
    splitmix64(master ^ fnv1a(path))
}

/// `count` seeds `derive_seed(master, "{prefix}/{i}")`.
pub fn seed_list(master: u64, prefix: &str, count: usize) -> Vec<u64> {
    (0..count)
        .map(|i| derive_seed(master, &format!("{prefix}/{i}")))
        .collect()
}
