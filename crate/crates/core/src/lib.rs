//! Benchmark framework for audio spoof detection.
//!
//! The pipeline runs in five stages, each its own module:
//!
//! - [`dataio`]: audio decoding, dataset manifests, corpus statistics, and a
//!   deterministic synthetic corpus for desk-scale runs.
//! - [`features`]: input-length policies and the cqtspec / logspec / melspec
//!   front ends (513-dimensional), plus raw-waveform passthrough.
//! - [`models`]: the twelve detector architectures behind one
//!   build/forward/score contract.
//! - [`training`]: cross-entropy training with Adam, plateau LR halving and
//!   early stopping; checkpoints and score production.
//! - [`metrics`]: EER, the ASVspoof-style tandem detection cost function, and
//!   result aggregation.

pub mod dataio;
pub mod features;
pub mod metrics;
pub mod models;
pub mod training;

/// Stable 64-bit FNV-1a, used to derive per-utterance random streams.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator guards against concatenation collisions
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded RNG for one utterance under a global seed and a purpose salt.
pub fn utt_rng(global_seed: u64, utt_id: &str, salt: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let h = stable_hash(&[&global_seed.to_le_bytes(), utt_id.as_bytes(), &salt.to_le_bytes()]);
    rand_chacha::ChaCha8Rng::seed_from_u64(h)
}
