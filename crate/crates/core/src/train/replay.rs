//! Proportional prioritized replay with FIFO eviction.

use std::collections::VecDeque;

use rand::Rng;

#[derive(Clone, Debug)]
pub struct PrioritizedReplay<T> {
    capacity: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    entries: VecDeque<(T, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub index: usize,
    /// Importance weight, normalized by the largest weight in the batch.
    pub weight: f64,
}

impl<T> PrioritizedReplay<T> {
    pub fn new(capacity: usize, alpha: f64, beta: f64, epsilon: f64) -> Self {
        assert!(capacity > 0);
        PrioritizedReplay {
            capacity,
            alpha,
            beta,
            epsilon,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &T {
        &self.entries[index].0
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.entries[index].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().map(|(t, _)| t)
    }

    /// Current maximum priority, never below 1.
    pub fn max_priority(&self) -> f64 {
        self.entries.iter().map(|(_, p)| *p).fold(1.0, f64::max)
    }

    /// Adds an entry with the current maximum priority, evicting the oldest
    /// one when full.
    pub fn push(&mut self, item: T) {
        let p = self.max_priority();
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((item, p));
    }

    /// Draws `n` indices with replacement, P(i) proportional to p_i^alpha.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Sample> {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        let scaled: Vec<f64> = self.entries.iter().map(|(_, p)| p.powf(self.alpha)).collect();
        let mut cumulative = Vec::with_capacity(scaled.len());
        let mut acc = 0.0;
        for s in &scaled {
            acc += s;
            cumulative.push(acc);
        }
        let total = acc;
        let len = self.entries.len() as f64;
        let mut picks: Vec<Sample> = (0..n)
            .map(|_| {
                let u = rng.gen::<f64>() * total;
                let index = cumulative.partition_point(|&c| c <= u).min(scaled.len() - 1);
                let prob = scaled[index] / total;
                Sample {
                    index,
                    weight: (len * prob).powf(-self.beta),
                }
            })
            .collect();
        let max = picks.iter().map(|s| s.weight).fold(0.0, f64::max);
        for s in &mut picks {
            s.weight /= max;
        }
        picks
    }

    pub fn update_priority(&mut self, index: usize, td_error: f64) {
        self.entries[index].1 = td_error.abs() + self.epsilon;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn fifo_eviction_and_capacity() {
        let mut r = PrioritizedReplay::new(3, 0.6, 0.4, 1e-3);
        for i in 0..5 {
            r.push(i);
        }
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().copied().collect::<Vec<_>>(), [2, 3, 4]);
    }

    #[test]
    fn new_entries_take_max_priority() {
        let mut r = PrioritizedReplay::new(10, 0.6, 0.4, 1e-3);
        r.push('a');
        assert_eq!(r.priority(0), 1.0);
        r.update_priority(0, -4.0);
        assert_eq!(r.priority(0), 4.001);
        r.push('b');
        assert_eq!(r.priority(1), 4.001);
        r.update_priority(0, 0.0);
        r.update_priority(1, 0.0);
        r.push('c');
        assert_eq!(r.priority(2), 1.0);
        assert!((0..3).all(|i| r.priority(i) > 0.0));
    }

    #[test]
    fn weights_normalized_by_batch_max() {
        let mut r = PrioritizedReplay::new(10, 0.6, 0.4, 1e-3);
        for i in 0..4 {
            r.push(i);
            r.update_priority(i, i as f64);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = r.sample(64, &mut rng);
        let max = s.iter().map(|x| x.weight).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(s.iter().all(|x| x.weight > 0.0 && x.weight <= 1.0));
    }

    #[test]
    fn sampling_follows_priorities() {
        let mut r = PrioritizedReplay::new(10, 0.6, 0.4, 0.0);
        for i in 0..10 {
            r.push(i);
            r.update_priority(i, (i + 1) as f64);
        }
        let weights: Vec<f64> = (0..10).map(|i| ((i + 1) as f64).powf(0.6)).collect();
        let total: f64 = weights.iter().sum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for s in r.sample(n, &mut rng) {
            counts[s.index] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(&c, w)| {
                let e = n as f64 * w / total;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square p = {p}");
    }
}
