// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams.
//!
//! Every draw made by the simulator is addressed by `(seed, purpose, group,
//! trace, cycle)`. ChaCha is a counter-mode generator, so a stream is just a
//! (key, stream id, word position) triple: the key comes from the seed, the
//! stream id packs purpose, group and trace, and each cycle owns a disjoint
//! 2^32-word window. Streams can be opened in any order, from any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Inputs = 0,
    Secret = 1,
    Noise = 2,
    Aux = 3,
}

const TRACE_BITS: u32 = 60;

#[derive(Clone, Debug)]
pub struct StreamKey {
    base: ChaCha8Rng,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, purpose: Purpose, group: u8, trace: u64, cycle: u32) -> ChaCha8Rng {
        debug_assert!(trace < 1 << TRACE_BITS && group < 4);
        let mut rng = self.base.clone();
        let id = (purpose as u64) << 62 | (group as u64) << TRACE_BITS | trace;
        rng.set_stream(id);
        rng.set_word_pos((cycle as u128) << 32);
        rng
    }
}
