//! Counter-style random substreams.
//!
//! Every (seed, round, consumer) triple maps to its own ChaCha stream: the
//! master seed and consumer tag form the key, the round index selects the
//! stream. Rounds can therefore be generated in any order, on any number
//! of workers, with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RoundRng = ChaCha8Rng;

/// Consumer of randomness within one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    Alice,
    Eve,
    Bob,
}

impl StreamLabel {
    fn tag(self) -> u64 {
        // ASCII of the label, so keys are stable across builds.
        match self {
            StreamLabel::Alice => u64::from_le_bytes(*b"alice\0\0\0"),
            StreamLabel::Eve => u64::from_le_bytes(*b"eve\0\0\0\0\0"),
            StreamLabel::Bob => u64::from_le_bytes(*b"bob\0\0\0\0\0"),
        }
    }
}

pub fn round_rng(seed: u64, round: u64, label: StreamLabel) -> RoundRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&label.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(round);
    rng
}
