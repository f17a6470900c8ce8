//! Fixed-capacity replay buffer with oldest-first eviction.

use std::collections::VecDeque;
use std::sync::Arc;

use duplex_core::preprocess::StateTensor;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<StateTensor>,
    /// Squashed action, before the environment's projection.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Arc<StateTensor>,
    pub done: bool,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.action.iter().all(|a| a.is_finite())
            && self.state.is_finite()
            && self.next_state.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be >= 1");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Uniform sample with replacement; `None` if fewer than `batch` items.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if self.items.len() < batch || batch == 0 {
            return None;
        }
        Some(
            (0..batch)
                .map(|_| &self.items[rng.random_range(0..self.items.len())])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        let s = Arc::new(StateTensor::zeros(1, 1, 0));
        Transition {
            state: s.clone(),
            action: vec![0.0],
            reward: r,
            next_state: s,
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64));
            assert!(b.len() <= 3);
        }
        let rewards: Vec<f64> = (0..b.len()).map(|i| b.get(i).reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(t(i as f64));
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.sample(8, &mut rng).unwrap().iter().map(|x| x.reward).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert!(b.sample(51, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }
}
