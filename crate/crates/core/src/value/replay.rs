use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::STATE_DIM;

/// One experience tuple. `A` is `f64` for continuous actions and `usize` for decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<A> {
    pub s: [f64; STATE_DIM],
    pub a: A,
    pub r: f64,
    pub s_next: [f64; STATE_DIM],
    pub terminal: bool,
}

/// Bounded FIFO sampled uniformly with replacement from its own seeded generator.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    capacity: usize,
    storage: VecDeque<Transition<A>>,
    rng: ChaCha8Rng,
}

impl<A: Copy> ReplayBuffer<A> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: VecDeque::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition<A>) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition<A>> + '_ {
        self.storage.iter()
    }

    /// `n` uniform draws with replacement, or `None` while fewer than `n` are stored.
    pub fn sample(&mut self, n: usize) -> Option<Vec<Transition<A>>> {
        if self.storage.len() < n || n == 0 {
            return None;
        }
        let len = self.storage.len();
        Some((0..n).map(|_| self.storage[self.rng.random_range(0..len)]).collect())
    }
}
