use rand::Rng;

use crate::error::{Error, Result};

/// Reservoir sample of an unbounded stream: after `k` insertions each item is
/// resident with probability `capacity / k`.
#[derive(Clone, Debug)]
pub struct ReservoirBuffer<T> {
    capacity: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T> ReservoirBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("reservoir capacity must be > 0".into()));
        }
        Ok(Self {
            capacity,
            seen: 0,
            items: Vec::new(),
        })
    }

    pub fn push<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
            return;
        }
        let slot = rng.gen_range(0..self.seen);
        if (slot as usize) < self.capacity {
            self.items[slot as usize] = item;
        }
    }

    /// `n` uniform draws with replacement from the resident items.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::NotReady("reservoir is empty"));
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

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn below_capacity_always_stored() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = ReservoirBuffer::new(5).unwrap();
        for i in 0..5 {
            b.push(i, &mut rng);
        }
        assert_eq!(b.items(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ReservoirBuffer::<u8>::new(0).is_err());
    }

    #[test]
    fn capacity_one_keeps_each_item_with_equal_probability() {
        let k = 8;
        let trials = 40_000;
        let mut counts = vec![0usize; k];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..trials {
            let mut b = ReservoirBuffer::new(1).unwrap();
            for i in 0..k {
                b.push(i, &mut rng);
            }
            counts[b.items()[0]] += 1;
        }
        let p = 1.0 / k as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in &counts {
            assert!((*c as f64 - trials as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
