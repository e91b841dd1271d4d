use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub unbiased_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            unbiased_fraction: 0.30,
            validation_fraction: 0.10,
            test_fraction: 0.20,
            rng_seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.unbiased_fraction, self.validation_fraction, self.test_fraction];
        if fracs.iter().any(|f| !(f > &0.0 && f < &1.0)) {
            return Err(Error::Config(format!("split fractions must lie in (0, 1), got {fracs:?}")));
        }
        if (self.validation_fraction + self.test_fraction - self.unbiased_fraction).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "validation ({}) + test ({}) must equal the unbiased fraction ({})",
                self.validation_fraction, self.test_fraction, self.unbiased_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Validation/test rows dropped because their user or item had no train row.
    pub dropped_rows: usize,
    pub dropped_users: usize,
    pub dropped_items: usize,
}

/// Tags a uniform random sample as the unbiased pool (validation + test),
/// the rest as train. Entities left without any train row lose their
/// held-out rows and are removed; indices are compacted afterwards.
pub fn split_biased_unbiased(ds: &InteractionDataset, cfg: &SplitConfig) -> Result<(InteractionDataset, SplitReport)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let n = ds.len();
    let n_unbiased = (cfg.unbiased_fraction * n as f64).round() as usize;
    let n_validation = ((cfg.validation_fraction * n as f64).round() as usize).min(n_unbiased);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(cfg.rng_seed, Stream::Split));
    let mut tagged = ds.clone();
    for it in &mut tagged.interactions {
        it.split = Split::Train;
    }
    for (rank, &idx) in order.iter().take(n_unbiased).enumerate() {
        tagged.interactions[idx].split = if rank < n_validation {
            Split::Validation
        } else {
            Split::Test
        };
    }
    let report = drop_entities_without_train(&mut tagged);
    if report.dropped_rows > 0 {
        log::warn!(
            "dropped {} held-out rows ({} users, {} items without train interactions)",
            report.dropped_rows,
            report.dropped_users,
            report.dropped_items
        );
    }
    Ok((tagged, report))
}

pub(crate) fn drop_entities_without_train(ds: &mut InteractionDataset) -> SplitReport {
    let mut user_ok = vec![false; ds.num_users()];
    let mut item_ok = vec![false; ds.num_items()];
    for (u, i) in ds.pairs(Split::Train) {
        user_ok[u as usize] = true;
        item_ok[i as usize] = true;
    }
    let before = ds.len();
    ds.interactions
        .retain(|it| user_ok[it.user as usize] && item_ok[it.item as usize]);
    let report = SplitReport {
        dropped_rows: before - ds.len(),
        dropped_users: user_ok.iter().filter(|&&ok| !ok).count(),
        dropped_items: item_ok.iter().filter(|&&ok| !ok).count(),
    };
    if report.dropped_users + report.dropped_items > 0 {
        let (users, user_remap) = ds.users.compact(&user_ok);
        let (items, item_remap) = ds.items.compact(&item_ok);
        for it in &mut ds.interactions {
            it.user = user_remap[it.user as usize].expect("kept user");
            it.item = item_remap[it.item as usize].expect("kept item");
        }
        ds.users = users;
        ds.items = items;
    }
    report
}

/// Moves `fraction` of the validation rows (the unbiased reserve) into
/// train. Test rows are never touched. Returns the new dataset and the
/// number of rows moved.
pub fn intervention_mix(ds: &InteractionDataset, fraction: f64, rng_seed: u64) -> Result<(InteractionDataset, usize)> {
    if fraction.is_nan() || fraction < 0.0 {
        return Err(Error::Config(format!("injection fraction must be in [0, 1], got {fraction}")));
    }
    let fraction = if fraction > 1.0 {
        log::warn!("injection fraction {fraction} exceeds the reserve; clamping to 1");
        1.0
    } else {
        fraction
    };
    let mut reserve: Vec<usize> = ds
        .interactions
        .iter()
        .enumerate()
        .filter(|(_, it)| it.split == Split::Validation)
        .map(|(idx, _)| idx)
        .collect();
    if reserve.is_empty() && fraction > 0.0 {
        log::warn!("no unbiased reserve available; nothing injected");
    }
    let n_move = (fraction * reserve.len() as f64).round() as usize;
    reserve.shuffle(&mut stream(rng_seed, Stream::Intervention));
    let mut out = ds.clone();
    for &idx in &reserve[..n_move] {
        out.interactions[idx].split = Split::Train;
    }
    Ok((out, n_move))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{IdMap, Interaction};

    fn dense(nu: usize, ni: usize) -> InteractionDataset {
        let interactions = (0..nu)
            .flat_map(|u| {
                (0..ni).map(move |i| Interaction {
                    user: u as u32,
                    item: i as u32,
                    split: Split::Train,
                })
            })
            .collect();
        InteractionDataset {
            users: IdMap::numeric(nu),
            items: IdMap::numeric(ni),
            interactions,
        }
    }

    fn cfg(seed: u64) -> SplitConfig {
        SplitConfig {
            rng_seed: seed,
            ..SplitConfig::default()
        }
    }

    #[test]
    fn hundred_rows_split_seven_one_two() {
        let (out, report) = split_biased_unbiased(&dense(10, 10), &cfg(1)).unwrap();
        assert_eq!(report, SplitReport::default());
        let c = out.split_counts();
        assert_eq!((c.train, c.validation, c.test), (70, 10, 20));
    }

    #[test]
    fn same_seed_same_tags() {
        let ds = dense(12, 9);
        let a = split_biased_unbiased(&ds, &cfg(5)).unwrap().0;
        let b = split_biased_unbiased(&ds, &cfg(5)).unwrap().0;
        let c = split_biased_unbiased(&ds, &cfg(6)).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ten_thousand_rows_within_one_of_exact() {
        let (out, _) = split_biased_unbiased(&dense(100, 100), &cfg(2)).unwrap();
        let c = out.split_counts();
        assert_eq!(c.total(), 10_000);
        assert!((c.train as i64 - 7000).abs() <= 1);
        assert!((c.validation as i64 - 1000).abs() <= 1);
        assert!((c.test as i64 - 2000).abs() <= 1);
    }

    #[test]
    fn bad_fractions_are_config_errors() {
        let mut bad = cfg(0);
        bad.test_fraction = 0.25;
        assert!(matches!(split_biased_unbiased(&dense(3, 3), &bad), Err(Error::Config(_))));
        bad = cfg(0);
        bad.unbiased_fraction = 1.2;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let empty = InteractionDataset {
            users: IdMap::new(),
            items: IdMap::new(),
            interactions: vec![],
        };
        assert!(split_biased_unbiased(&empty, &cfg(0)).is_err());
    }

    #[test]
    fn entities_without_train_rows_are_dropped() {
        // User 1 owns a single interaction; whenever it is held out the user disappears.
        let mut ds = dense(6, 6);
        ds.users.intern("lonely");
        ds.interactions.push(Interaction {
            user: 6,
            item: 0,
            split: Split::Train,
        });
        for seed in 0..20 {
            let (out, report) = split_biased_unbiased(&ds, &cfg(seed)).unwrap();
            out.validate().unwrap();
            let train_users: std::collections::HashSet<u32> = out.pairs(Split::Train).map(|p| p.0).collect();
            assert_eq!(train_users.len(), out.num_users());
            assert_eq!(out.split_counts().total() + report.dropped_rows, ds.len());
        }
    }

    #[test]
    fn split_is_a_partition() {
        let (out, report) = split_biased_unbiased(&dense(7, 13), &cfg(9)).unwrap();
        assert_eq!(out.split_counts().total() + report.dropped_rows, 91);
    }

    fn with_reserve(n_val: usize) -> InteractionDataset {
        let mut ds = dense(20, 20);
        for (k, it) in ds.interactions.iter_mut().enumerate() {
            if k % 2 == 1 && k / 2 < n_val {
                it.split = Split::Validation;
            } else if k % 7 == 0 {
                it.split = Split::Test;
            }
        }
        ds
    }

    #[test]
    fn injection_fraction_zero_is_identity() {
        let ds = with_reserve(200);
        let (out, moved) = intervention_mix(&ds, 0.0, 1).unwrap();
        assert_eq!(moved, 0);
        assert_eq!(out, ds);
    }

    #[test]
    fn injection_moves_reserve_and_never_test() {
        let ds = with_reserve(200);
        let before = ds.split_counts();
        assert_eq!(before.validation, 200);
        let (half, moved) = intervention_mix(&ds, 0.5, 3).unwrap();
        assert_eq!(moved, 100);
        assert_eq!(half.split_counts().train, before.train + 100);
        assert_eq!(half.split_counts().test, before.test);
        let (all, moved) = intervention_mix(&ds, 1.0, 3).unwrap();
        assert_eq!(moved, before.validation);
        assert_eq!(all.split_counts().validation, 0);
        let test_rows = |d: &InteractionDataset| d.pairs(Split::Test).collect::<Vec<_>>();
        assert_eq!(test_rows(&all), test_rows(&ds));
        assert_eq!(intervention_mix(&ds, 0.5, 3).unwrap().0, half);
    }

    #[test]
    fn injection_fraction_above_one_clamps() {
        let ds = with_reserve(50);
        let (out, moved) = intervention_mix(&ds, 1.7, 0).unwrap();
        assert_eq!(moved, 50);
        assert_eq!(out.split_counts().validation, 0);
        assert!(intervention_mix(&ds, -0.1, 0).is_err());
    }
}
