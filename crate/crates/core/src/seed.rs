//! Root-seed expansion.
//!
//! All randomness in the artifact flows from one root seed, expanded per
//! phase with a fixed mixing function so every phase gets an independent,
//! reproducible stream. The mixer is splitmix64 folded over the phase
//! label; the standard library hasher is not stable across releases, so it
//! cannot be used here.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a phase seed from the root seed and a phase label.
pub fn derive(root: u64, label: &str) -> u64 {
    let mut state = splitmix64(root);
    for byte in label.bytes() {
        state = splitmix64(state ^ u64::from(byte));
    }
    state
}
