//! Negative sampling: uniform over non-interacted items, or popularity
//! based with a margin (PNSM), where a negative must be at least `margin`
//! interactions more popular than the positive it is paired with.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NegativeSampling {
    Uniform,
    Pnsm { margin: f64 },
}

const REJECTION_TRIES: usize = 64;

pub struct NegativeSampler {
    mode: NegativeSampling,
    /// Sorted train items per user.
    user_items: Vec<Vec<u32>>,
    popularity: Vec<u64>,
    /// Items in ascending popularity order (ties by index).
    by_popularity: Vec<u32>,
}

impl NegativeSampler {
    pub fn new(mode: NegativeSampling, user_items: Vec<Vec<u32>>, popularity: Vec<u64>) -> Self {
        let mut by_popularity: Vec<u32> = (0..popularity.len() as u32).collect();
        by_popularity.sort_by_key(|&i| (popularity[i as usize], i));
        Self {
            mode,
            user_items,
            popularity,
            by_popularity,
        }
    }

    fn interacted(&self, user: u32, item: u32) -> bool {
        self.user_items[user as usize].binary_search(&item).is_ok()
    }

    /// Uniform draw from `pool`, skipping the user's positives.
    fn draw_from<R: Rng + ?Sized>(&self, user: u32, pool: &[u32], rng: &mut R) -> Option<u32> {
        if pool.is_empty() {
            return None;
        }
        for _ in 0..REJECTION_TRIES {
            let cand = pool[rng.random_range(0..pool.len())];
            if !self.interacted(user, cand) {
                return Some(cand);
            }
        }
        let free: Vec<u32> = pool.iter().copied().filter(|&i| !self.interacted(user, i)).collect();
        (!free.is_empty()).then(|| free[rng.random_range(0..free.len())])
    }

    pub fn sample<R: Rng + ?Sized>(&self, user: u32, positive: u32, rng: &mut R) -> Result<u32> {
        if self.user_items[user as usize].len() >= self.popularity.len() {
            return Err(Error::Data(format!("user {user} interacted with every item")));
        }
        if let NegativeSampling::Pnsm { margin } = self.mode {
            let floor = self.popularity[positive as usize] as f64 + margin;
            let start = self
                .by_popularity
                .partition_point(|&i| (self.popularity[i as usize] as f64) < floor);
            if let Some(neg) = self.draw_from(user, &self.by_popularity[start..], rng) {
                return Ok(neg);
            }
        }
        Ok(self
            .draw_from(user, &self.by_popularity, rng)
            .expect("user has at least one non-interacted item"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn sampler(mode: NegativeSampling) -> NegativeSampler {
        // popularity: item k has k*3 interactions
        let popularity: Vec<u64> = (0..20).map(|k| 3 * k).collect();
        let user_items = vec![vec![2, 5, 19], (0..19).collect(), (0..20).collect()];
        NegativeSampler::new(mode, user_items, popularity)
    }

    #[test]
    fn disabled_margin_is_uniform() {
        let s = sampler(NegativeSampling::Pnsm { margin: f64::NEG_INFINITY });
        let mut rng = stream(1, Stream::Negatives);
        let mut counts = [0usize; 20];
        for _ in 0..17_000 {
            counts[s.sample(0, 2, &mut rng).unwrap() as usize] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            if [2, 5, 19].contains(&i) {
                assert_eq!(c, 0);
            } else {
                assert!((800..1200).contains(&c), "item {i}: {c}");
            }
        }
    }

    #[test]
    fn margin_constraint_holds_over_many_draws() {
        let s = sampler(NegativeSampling::Pnsm { margin: 10.0 });
        let mut rng = stream(2, Stream::Negatives);
        for _ in 0..10_000 {
            let neg = s.sample(0, 5, &mut rng).unwrap();
            assert!(s.popularity[neg as usize] >= s.popularity[5] + 10);
            assert!(!s.interacted(0, neg));
        }
    }

    #[test]
    fn most_popular_positive_falls_back_to_uniform() {
        let s = sampler(NegativeSampling::Pnsm { margin: 1.0 });
        let mut rng = stream(3, Stream::Negatives);
        let neg = s.sample(0, 19, &mut rng).unwrap();
        assert!(!s.interacted(0, neg));
        // only item 19 is free for user 1, and its constraint set excludes nothing it could use
        assert_eq!(s.sample(1, 0, &mut rng).unwrap(), 19);
    }

    #[test]
    fn saturated_user_is_an_error() {
        let s = sampler(NegativeSampling::Uniform);
        assert!(s.sample(2, 0, &mut stream(4, Stream::Negatives)).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let s = sampler(NegativeSampling::Pnsm { margin: 10.0 });
        let draw = || {
            let mut rng = stream(5, Stream::Negatives);
            (0..50).map(|_| s.sample(0, 3, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }
}
