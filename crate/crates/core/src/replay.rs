//! Bounded FIFO replay memory with seeded uniform sampling.

use rand::Rng;

use crate::{prng, Error, Prng, Result};

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
    rng: Prng,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            rng: prng(seed),
        })
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

    /// Appends, evicting the oldest record when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.head] = item;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Records from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// `n` storage indices drawn uniformly with replacement.
    pub fn sample_indices(&mut self, n: usize) -> Vec<usize> {
        let len = self.items.len();
        if len == 0 {
            return Vec::new();
        }
        (0..n).map(|_| self.rng.gen_range(0..len)).collect()
    }

    pub fn get(&self, index: usize) -> &T {
        &self.items[index]
    }

    /// `n` records drawn uniformly with replacement.
    pub fn sample(&mut self, n: usize) -> Vec<&T> {
        let idx = self.sample_indices(n);
        idx.into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3, 0).unwrap();
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut a = ReplayBuffer::new(100, 9).unwrap();
        let mut b = ReplayBuffer::new(100, 9).unwrap();
        for i in 0..50 {
            a.push(i);
            b.push(i);
        }
        assert_eq!(a.sample_indices(32), b.sample_indices(32));
        assert!(a.sample(10).iter().all(|&&x| x < 50));
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ReplayBuffer::<u8>::new(0, 0).is_err());
    }
}
