//! Seed splitting.
//!
//! Every random stream in the simulator is derived from a single master seed
//! together with a module tag and a task index.  The 32-byte ChaCha key is laid
//! out as
//!
//! ```text
//! bytes  0..8   master seed        (u64, little endian)
//! bytes  8..16  FNV-1a-64(tag)     (u64, little endian)
//! bytes 16..24  task index         (u64, little endian)
//! bytes 24..32  zero
//! ```
//!
//! and fed to ChaCha8.  Streams for distinct `(tag, index)` pairs are therefore
//! independent keys rather than offsets into one stream, so adding a task never
//! perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(master: u64, tag: &str, index: u64) -> Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(tag.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derive a child master seed, for handing a whole sub-experiment its own seed space.
pub fn child(master: u64, tag: &str, index: u64) -> u64 {
    use rand::RngCore;
    stream(master, tag, index).next_u64()
}
