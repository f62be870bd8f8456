//! FIFO replay storage for discriminator negatives and the auxiliary
//! reward-prediction buffers.

use std::collections::VecDeque;

use gridlu_env::WorldState;
use instruction_lang::Instruction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// An (instruction, state) pair as stored by the replay machinery.
pub type Pair = (Instruction, WorldState);

/// Bounded FIFO of agent experiences `(c, s)`. When full, pushing evicts the
/// oldest entry, so the buffer always holds the most recent `capacity` pairs.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Pair>,
    capacity: usize,
    /// Number of draws that had to fall back to sampling with replacement.
    pub replacement_draws: usize,
    warned: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            replacement_draws: 0,
            warned: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, instruction: Instruction, state: WorldState) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((instruction, state));
    }

    /// Draws `n` pairs, without replacement when the buffer is large enough.
    /// A short buffer falls back to drawing with replacement and logs a
    /// warning (once). Results are ordered oldest first so that downstream
    /// tie-breaking by insertion order is well defined.
    pub fn sample(&mut self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Pair> {
        assert!(!self.items.is_empty(), "cannot sample from an empty replay buffer");
        let mut idx: Vec<usize> = if self.items.len() >= n {
            rand::seq::index::sample(rng, self.items.len(), n).into_vec()
        } else {
            self.replacement_draws += 1;
            if !self.warned {
                self.warned = true;
                eprintln!(
                    "warning: replay buffer holds {} < {} requested negatives; \
                     sampling with replacement until it fills",
                    self.items.len(),
                    n
                );
            }
            (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
        };
        idx.sort_unstable();
        idx.into_iter().map(|i| self.items[i].clone()).collect()
    }
}

/// Capacity of each class queue in the reward-prediction buffer.
pub const RP_BUFFER_CAPACITY: usize = 10_000;

/// Recent states split by whether the step that left them paid a reward.
/// Feeds the auxiliary reward-prediction gradient of the ground-truth
/// baseline; balanced batches need both classes present.
#[derive(Debug, Clone, Default)]
pub struct RpBuffer {
    positives: VecDeque<Pair>,
    zeros: VecDeque<Pair>,
}

impl RpBuffer {
    pub fn new() -> Self {
        RpBuffer::default()
    }

    pub fn push(&mut self, instruction: Instruction, state: WorldState, rewarded: bool) {
        let queue = if rewarded { &mut self.positives } else { &mut self.zeros };
        if queue.len() == RP_BUFFER_CAPACITY {
            queue.pop_front();
        }
        queue.push_back((instruction, state));
    }

    /// True when a balanced batch can be formed.
    pub fn has_both_classes(&self) -> bool {
        !self.positives.is_empty() && !self.zeros.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positives.len()
    }

    pub fn zero_count(&self) -> usize {
        self.zeros.len()
    }

    /// Uniform draw (with replacement) from one class.
    pub fn draw(&self, rewarded: bool, rng: &mut ChaCha8Rng) -> Pair {
        let queue = if rewarded { &self.positives } else { &self.zeros };
        assert!(!queue.is_empty(), "reward-prediction class queue is empty");
        queue[rng.gen_range(0..queue.len())].clone()
    }
}
