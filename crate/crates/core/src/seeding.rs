//! Named random substreams derived from one master seed.
//!
//! Every consumer of randomness draws from its own ChaCha stream, selected by
//! a fixed stream id. Adding draws to one stream never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Env,
    PolicyInit,
    PolicySampling,
    Esa,
    Eval,
    Baseline,
    Minibatch,
    Viz,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::PolicyInit => 2,
            Stream::PolicySampling => 3,
            Stream::Esa => 4,
            Stream::Eval => 5,
            Stream::Baseline => 6,
            Stream::Minibatch => 7,
            Stream::Viz => 8,
        }
    }
}

/// Returns the generator for `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.id());
    rng
}

/// Child generator seeded from a parent draw; used for per-item substreams
/// (one per particle, one per evaluation worker) so parallel work stays
/// reproducible regardless of scheduling.
pub fn child_rng(parent: &mut ChaCha8Rng) -> ChaCha8Rng {
    use rand::Rng;
    ChaCha8Rng::seed_from_u64(parent.random::<u64>())
}
