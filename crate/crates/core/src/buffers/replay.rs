use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// Fixed-capacity FIFO buffer; the oldest entry is evicted when full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay buffer capacity must be > 0".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::NotReady("replay buffer is empty"));
        }
        Ok((0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(2).unwrap();
        b.push('a');
        b.push('b');
        b.push('c');
        assert_eq!(b.iter().copied().collect::<String>(), "bc");
    }

    #[test]
    fn size_stays_at_capacity() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..1000 {
            b.push(i);
        }
        assert_eq!(b.len(), 100);
        assert_eq!(*b.iter().next().unwrap(), 900);
    }

    #[test]
    fn single_element_sampling() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.push(7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(1, &mut rng).unwrap(), vec![&7]);
        let many = b.sample(32, &mut rng).unwrap();
        assert_eq!(many.len(), 32);
        assert!(many.iter().all(|&&v| v == 7));
    }

    #[test]
    fn empty_buffer_is_not_ready() {
        let b: ReplayBuffer<u8> = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(1, &mut rng), Err(Error::NotReady(_))));
        assert!(ReplayBuffer::<u8>::new(0).is_err());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut b = ReplayBuffer::new(50).unwrap();
        (0..50).for_each(|i| b.push(i));
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.sample(64, &mut rng).unwrap().into_iter().copied().collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10).unwrap();
        (0..10).for_each(|i| b.push(i));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for v in b.sample(n, &mut rng).unwrap() {
            counts[*v] += 1;
        }
        // Multinomial: each count ~ Binomial(n, 0.1).
        let mean = n as f64 * 0.1;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
