//! Synthetic interactions with known user and item confounders.
//!
//! Users and items get taste vectors and confounders from standard
//! Gaussians. The click logit is taste affinity plus a user-confounder
//! term (the confounder shifts which item tastes the user favours) plus an
//! item-confounder term (a scalar appeal of the item). Training rows are
//! observed under exposure tilted toward items with high confounder
//! appeal; validation and test rows are observed under uniform exposure
//! from the same click model.

mod cca;
mod truth;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::{drop_entities_without_train, IdMap, Interaction, InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::numkit::linalg::sigmoid;
use crate::numkit::standard_normals;
use crate::rng::{stream, Stream};

pub use cca::{canonical_correlations, confounder_recovery_score, permutation_null, NullSummary};
pub use truth::{read_ground_truth, read_ground_truth_from, write_ground_truth, write_ground_truth_to, GROUND_TRUTH_HEADER};

/// Share of the target interactions placed in train; the rest is drawn
/// under uniform exposure and split 1:2 into validation and test.
const TRAIN_SHARE: f64 = 0.7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub latent_dim: usize,
    pub confounder_dim: usize,
    pub w_u: f64,
    pub w_i: f64,
    pub exposure_bias: f64,
    /// Expected interactions over all splits divided by users × items.
    pub density_target: f64,
    /// Multiplier applied to the logit before the logistic click link.
    pub click_scale: f64,
    /// Added after scaling; negative values concentrate clicks on each
    /// user's best-matching items.
    pub click_offset: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_users: 2000,
            num_items: 3000,
            latent_dim: 16,
            confounder_dim: 4,
            w_u: 1.0,
            w_i: 1.0,
            exposure_bias: 1.0,
            density_target: 0.01,
            click_scale: 2.0,
            click_offset: -6.0,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_users == 0 || self.num_items == 0 || self.latent_dim == 0 || self.confounder_dim == 0 {
            return bad("synthetic sizes and dimensions must be at least 1".into());
        }
        if !(self.w_u >= 0.0 && self.w_i >= 0.0 && self.exposure_bias >= 0.0) || !(self.w_u + self.w_i + self.exposure_bias).is_finite() {
            return bad("w_u, w_i and exposure_bias must be finite and nonnegative".into());
        }
        if !(self.density_target > 0.0 && self.density_target < 1.0) {
            return bad(format!("density_target must lie in (0, 1), got {}", self.density_target));
        }
        if !(self.click_scale > 0.0) || !self.click_scale.is_finite() || !self.click_offset.is_finite() {
            return bad("click_scale must be positive and click_offset finite".into());
        }
        Ok(())
    }
}

/// Generator internals worth reporting next to the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    /// Scale `c` of the train exposure `min(1, c * exp(bias * appeal))`.
    pub exposure_scale: f64,
    /// Uniform exposure probability of the unbiased draws.
    pub unbiased_rate: f64,
    pub expected_interactions: f64,
    pub dropped_users: usize,
    pub dropped_items: usize,
}

/// Row-major ground truth aligned with the generated dataset's indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthGroundTruth {
    pub num_users: usize,
    pub num_items: usize,
    pub confounder_dim: usize,
    pub true_user_confounders: Vec<f64>,
    pub true_item_confounders: Vec<f64>,
    /// Click logits, `num_users × num_items`.
    pub preference_matrix: Vec<f64>,
    pub report: SynthReport,
}

impl SynthGroundTruth {
    pub fn user_confounder(&self, u: usize) -> &[f64] {
        let c = self.confounder_dim;
        &self.true_user_confounders[u * c..(u + 1) * c]
    }

    pub fn item_confounder(&self, i: usize) -> &[f64] {
        let c = self.confounder_dim;
        &self.true_item_confounders[i * c..(i + 1) * c]
    }

    /// Scalar appeal `⟨c_i, 1⟩ / √C` that drives both the item-confounder
    /// click term and the exposure tilt.
    pub fn item_appeal(&self) -> Vec<f64> {
        (0..self.num_items).map(|i| appeal(self.item_confounder(i))).collect()
    }

    pub fn user_rows(&self) -> Vec<Vec<f64>> {
        self.true_user_confounders.chunks(self.confounder_dim).map(<[f64]>::to_vec).collect()
    }

    pub fn item_rows(&self) -> Vec<Vec<f64>> {
        self.true_item_confounders.chunks(self.confounder_dim).map(<[f64]>::to_vec).collect()
    }

    pub fn preference(&self, u: usize, i: usize) -> f64 {
        self.preference_matrix[u * self.num_items + i]
    }
}

fn appeal(c: &[f64]) -> f64 {
    c.iter().sum::<f64>() / (c.len() as f64).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest `c` with `Σ_i min(1, c g_i) S_i ≥ target`, by bisection.
fn solve_exposure_scale(g: &[f64], col: &[f64], target: f64) -> f64 {
    let expected = |c: f64| g.iter().zip(col).map(|(gi, si)| (c * gi).min(1.0) * si).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while expected(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn generate(cfg: &SynthConfig) -> Result<(InteractionDataset, SynthGroundTruth)> {
    cfg.validate()?;
    let (nu, ni, l, c) = (cfg.num_users, cfg.num_items, cfg.latent_dim, cfg.confounder_dim);
    let mut rng = stream(cfg.rng_seed, Stream::Synth);
    let user_taste = standard_normals(&mut rng, nu * l);
    let item_taste = standard_normals(&mut rng, ni * l);
    let user_conf = standard_normals(&mut rng, nu * c);
    let item_conf = standard_normals(&mut rng, ni * c);
    let mixing: Vec<f64> = standard_normals(&mut rng, l * c).into_iter().map(|a| a / (c as f64).sqrt()).collect();

    let sqrt_l = (l as f64).sqrt();
    let item_appeal: Vec<f64> = item_conf.chunks(c).map(appeal).collect();
    let user_shift: Vec<f64> = user_conf
        .chunks(c)
        .flat_map(|cu| (0..l).map(|r| dot(&mixing[r * c..(r + 1) * c], cu)).collect::<Vec<_>>())
        .collect();

    let mut logits = vec![0.0; nu * ni];
    let mut col = vec![0.0; ni];
    for u in 0..nu {
        let tu = &user_taste[u * l..(u + 1) * l];
        let su = &user_shift[u * l..(u + 1) * l];
        for i in 0..ni {
            let si = &item_taste[i * l..(i + 1) * l];
            let z = (dot(tu, si) + cfg.w_u * dot(su, si)) / sqrt_l + cfg.w_i * item_appeal[i];
            let logit = cfg.click_scale * z + cfg.click_offset;
            logits[u * ni + i] = logit;
            col[i] += sigmoid(logit);
        }
    }

    let cells = (nu * ni) as f64;
    let train_target = TRAIN_SHARE * cfg.density_target * cells;
    let unbiased_target = (1.0 - TRAIN_SHARE) * cfg.density_target * cells;
    let achievable: f64 = col.iter().sum();
    if train_target + unbiased_target > achievable {
        return Err(Error::DensityUnreachable {
            requested: cfg.density_target,
            achievable: achievable / cells,
        });
    }
    let tilt: Vec<f64> = item_appeal.iter().map(|&a| (cfg.exposure_bias * a).exp()).collect();
    let scale = solve_exposure_scale(&tilt, &col, train_target);
    let exposure: Vec<f64> = tilt.iter().map(|&t| (scale * t).min(1.0)).collect();

    let mut in_train = vec![false; nu * ni];
    let mut interactions = Vec::new();
    let mut remaining = 0.0;
    for u in 0..nu {
        for i in 0..ni {
            let p = sigmoid(logits[u * ni + i]);
            if rng.random::<f64>() < exposure[i] * p {
                in_train[u * ni + i] = true;
                interactions.push(Interaction {
                    user: u as u32,
                    item: i as u32,
                    split: Split::Train,
                });
            } else {
                remaining += p;
            }
        }
    }
    let unbiased_rate = unbiased_target / remaining;
    if unbiased_rate > 1.0 {
        return Err(Error::DensityUnreachable {
            requested: cfg.density_target,
            achievable: (train_target + remaining) / cells,
        });
    }
    for u in 0..nu {
        for i in 0..ni {
            if in_train[u * ni + i] {
                continue;
            }
            if rng.random::<f64>() < unbiased_rate * sigmoid(logits[u * ni + i]) {
                let split = if rng.random::<f64>() < 1.0 / 3.0 {
                    Split::Validation
                } else {
                    Split::Test
                };
                interactions.push(Interaction {
                    user: u as u32,
                    item: i as u32,
                    split,
                });
            }
        }
    }

    let mut ds = InteractionDataset {
        users: IdMap::numeric(nu),
        items: IdMap::numeric(ni),
        interactions,
    };
    let mut user_ok = vec![false; nu];
    let mut item_ok = vec![false; ni];
    for (u, i) in ds.pairs(Split::Train) {
        user_ok[u as usize] = true;
        item_ok[i as usize] = true;
    }
    let dropped = drop_entities_without_train(&mut ds);
    if dropped.dropped_users + dropped.dropped_items > 0 {
        log::info!(
            "synthetic data: {} users and {} items without train rows removed",
            dropped.dropped_users,
            dropped.dropped_items
        );
    }
    let keep_rows = |data: &[f64], ok: &[bool], width: usize| -> Vec<f64> {
        data.chunks(width).zip(ok).filter(|(_, &k)| k).flat_map(|(r, _)| r.iter().copied()).collect()
    };
    let kept_items: Vec<usize> = (0..ni).filter(|&i| item_ok[i]).collect();
    let preference_matrix = (0..nu)
        .filter(|&u| user_ok[u])
        .flat_map(|u| kept_items.iter().map(move |&i| (u, i)))
        .map(|(u, i)| logits[u * ni + i])
        .collect();
    let truth = SynthGroundTruth {
        num_users: ds.num_users(),
        num_items: ds.num_items(),
        confounder_dim: c,
        true_user_confounders: keep_rows(&user_conf, &user_ok, c),
        true_item_confounders: keep_rows(&item_conf, &item_ok, c),
        preference_matrix,
        report: SynthReport {
            exposure_scale: scale,
            unbiased_rate,
            expected_interactions: train_target + unbiased_target,
            dropped_users: dropped.dropped_users,
            dropped_items: dropped.dropped_items,
        },
    };
    Ok((ds, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            num_users: 300,
            num_items: 400,
            density_target: 0.05,
            click_offset: -2.0,
            rng_seed: seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (a, ga) = generate(&small(3)).unwrap();
        let (b, gb) = generate(&small(3)).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(ga, gb);
        let (c, _) = generate(&small(4)).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn density_and_split_shares() {
        let cfg = SynthConfig {
            density_target: 0.1,
            ..small(1)
        };
        let (ds, truth) = generate(&cfg).unwrap();
        ds.validate().unwrap();
        let counts = ds.split_counts();
        let target = cfg.density_target * (cfg.num_users * cfg.num_items) as f64;
        assert!(counts.total() >= 10_000);
        assert!(((counts.total() as f64) / target - 1.0).abs() < 0.10, "{counts:?}");
        assert!(((counts.train as f64) / (TRAIN_SHARE * target) - 1.0).abs() < 0.10);
        let val_share = counts.validation as f64 / (counts.validation + counts.test) as f64;
        assert!((val_share - 1.0 / 3.0).abs() < 0.03);
        assert_eq!(truth.true_user_confounders.len(), ds.num_users() * cfg.confounder_dim);
        assert_eq!(truth.preference_matrix.len(), ds.num_users() * ds.num_items());
        assert!(truth.preference_matrix.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn every_entity_has_train_rows() {
        let (ds, _) = generate(&small(2)).unwrap();
        let per_user = ds.user_items(Split::Train);
        let per_item = ds.item_users(Split::Train);
        assert!(per_user.iter().all(|v| !v.is_empty()));
        assert!(per_item.iter().all(|v| !v.is_empty()));
    }

    fn popularity_by_split(ds: &InteractionDataset, split: Split) -> Vec<f64> {
        let mut pop = vec![0.0; ds.num_items()];
        for (_, i) in ds.pairs(split) {
            pop[i as usize] += 1.0;
        }
        pop
    }

    #[test]
    fn no_confounding_means_matching_train_and_test_popularity() {
        let cfg = SynthConfig {
            w_u: 0.0,
            w_i: 0.0,
            exposure_bias: 0.0,
            ..small(5)
        };
        let (ds, _) = generate(&cfg).unwrap();
        // Homogeneity test on 20 item bins, so expected cell counts stay large.
        let bins = 20;
        let bin_of = |i: usize| i * bins / ds.num_items();
        let mut table = [vec![0.0; bins], vec![0.0; bins]];
        for (row, split) in [Split::Train, Split::Test].into_iter().enumerate() {
            for (i, c) in popularity_by_split(&ds, split).into_iter().enumerate() {
                table[row][bin_of(i)] += c;
            }
        }
        let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let n: f64 = row_tot.iter().sum();
        let mut stat = 0.0;
        for b in 0..bins {
            let col_tot = table[0][b] + table[1][b];
            for r in 0..2 {
                let e = row_tot[r] * col_tot / n;
                stat += (table[r][b] - e).powi(2) / e;
            }
        }
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "chi2 {stat}, p {p}");
    }

    #[test]
    fn exposure_bias_inflates_confounded_train_popularity() {
        let cfg = SynthConfig {
            exposure_bias: 2.0,
            ..small(6)
        };
        let (ds, truth) = generate(&cfg).unwrap();
        let appeal = truth.item_appeal();
        let mut order: Vec<usize> = (0..ds.num_items()).collect();
        order.sort_by(|&a, &b| appeal[b].total_cmp(&appeal[a]));
        let top: Vec<usize> = order[..ds.num_items() / 10].to_vec();
        let share = |pop: Vec<f64>| top.iter().map(|&i| pop[i]).sum::<f64>() / pop.iter().sum::<f64>();
        let train = share(popularity_by_split(&ds, Split::Train));
        let test = share(popularity_by_split(&ds, Split::Test));
        assert!(train > test, "train share {train}, test share {test}");
    }

    #[test]
    fn unreachable_density_reports_bound() {
        let cfg = SynthConfig {
            density_target: 0.9,
            ..small(1)
        };
        match generate(&cfg) {
            Err(Error::DensityUnreachable { requested, achievable }) => {
                assert_eq!(requested, 0.9);
                assert!(achievable < 0.9 && achievable > 0.0);
            }
            other => panic!("expected DensityUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { latent_dim: 0, ..small(0) },
            SynthConfig { w_u: -1.0, ..small(0) },
            SynthConfig { density_target: 0.0, ..small(0) },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        }
    }
}
