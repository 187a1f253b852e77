//! Keyed random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose 256-bit
//! key is assembled directly from `(seed, domain, a, b)`. Work items therefore
//! own their streams outright, and results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams used for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    PriorEntry = 1,
    CholeskyDraw = 2,
    CfaData = 3,
    CfaChain = 4,
    SbcSim = 5,
    Threshold = 6,
    Generic = 7,
}

/// Generator keyed by `(seed, domain, a, b)`.
pub fn substream(seed: u64, domain: Domain, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Runs `f` on a dedicated pool of `workers` threads (0 means rayon's
/// default). Library results never depend on the pool size.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction");
    pool.install(f)
}
