//! Counter-based seed derivation.
//!
//! Seeds for replicates and sub-streams are pure functions of their inputs,
//! so any work item can derive its randomness without shared state.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash of a name. Stable across platforms and releases.
pub fn name_hash(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mixes a master seed with a counter into a new, well-spread seed.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(master) ^ counter.wrapping_mul(GOLDEN))
}

/// Seed for replicate `index` of the test called `test_name`.
pub fn replicate_seed(master: u64, index: u64, test_name: &str) -> u64 {
    derive_seed(derive_seed(master, name_hash(test_name)), index)
}
