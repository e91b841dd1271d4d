use deconfrec::baselines::{ips_weights, IpsVariant, PropensityTable};
use deconfrec::dataio::{intervention_mix, split_biased_unbiased, IdMap, Interaction, InteractionDataset, Split, SplitConfig};
use deconfrec::eval::{evaluate, top_k_from_scores, Ranker, RunMeta};
use deconfrec::mcdcf::{predict_topk, Contexts, ModelParams, ModelShape, Scorer};
use proptest::prelude::*;

struct Scores(Vec<Vec<f64>>);

impl Ranker for Scores {
    fn num_items(&self) -> usize {
        self.0[0].len()
    }

    fn top_k(&self, user: u32, k: usize, exclude: &[u32]) -> Vec<u32> {
        top_k_from_scores(&self.0[user as usize], k, exclude)
    }
}

fn dataset(cells: &[Vec<u8>]) -> InteractionDataset {
    let interactions = cells
        .iter()
        .enumerate()
        .flat_map(|(u, row)| {
            row.iter().enumerate().filter_map(move |(i, &c)| {
                let split = match c {
                    1 => Split::Train,
                    2 => Split::Validation,
                    3 => Split::Test,
                    _ => return None,
                };
                Some(Interaction {
                    user: u as u32,
                    item: i as u32,
                    split,
                })
            })
        })
        .collect();
    InteractionDataset {
        users: IdMap::numeric(cells.len()),
        items: IdMap::numeric(cells[0].len()),
        interactions,
    }
}

fn grid(users: usize, items: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    proptest::collection::vec(proptest::collection::vec(0u8..6, items), users)
}

fn unique_scores(users: usize, items: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    // distinct scores per row so no transform can create or break ties
    let row: Vec<f64> = (0..items).map(|i| i as f64 - items as f64 / 2.0).collect();
    proptest::collection::vec(Just(row).prop_shuffle(), users)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_survive_monotone_score_transforms(cells in grid(8, 15), scores in unique_scores(8, 15)) {
        let ds = dataset(&cells);
        let ks = [1, 3, 5, 10];
        let base = evaluate(&Scores(scores.clone()), &ds, Split::Test, &ks, RunMeta::default()).unwrap();
        let transformed: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|s| (0.3 * s).exp() * 7.0 + 2.0).collect())
            .collect();
        let other = evaluate(&Scores(transformed), &ds, Split::Test, &ks, RunMeta::default()).unwrap();
        prop_assert_eq!(base.at, other.at);
        prop_assert!(base.evaluated_users <= base.num_users);
    }

    #[test]
    fn split_partitions_and_keeps_train_coverage(n in 40usize..400, seed in 0u64..1000) {
        let pairs: std::collections::BTreeSet<(u32, u32)> = (0..n).map(|r| ((r % 13) as u32, (r * 7 % 29) as u32)).collect();
        let interactions = pairs
            .into_iter()
            .map(|(user, item)| Interaction { user, item, split: Split::Train })
            .collect();
        let ds = InteractionDataset { users: IdMap::numeric(13), items: IdMap::numeric(29), interactions };
        let cfg = SplitConfig { rng_seed: seed, ..SplitConfig::default() };
        let (out, report) = split_biased_unbiased(&ds, &cfg).unwrap();
        let counts = out.split_counts();
        prop_assert_eq!(counts.total() + report.dropped_rows, ds.len());
        let train_users = out.user_items(Split::Train);
        let train_items = out.item_users(Split::Train);
        prop_assert!(train_users.iter().all(|v| !v.is_empty()));
        prop_assert!(train_items.iter().all(|v| !v.is_empty()));
        prop_assert!(out.validate().is_ok());
    }

    #[test]
    fn injection_never_touches_test(cells in grid(10, 12), fraction in 0.0f64..1.0, seed in 0u64..100) {
        let ds = dataset(&cells);
        let (mixed, moved) = intervention_mix(&ds, fraction, seed).unwrap();
        let tests = |d: &InteractionDataset| d.pairs(Split::Test).collect::<Vec<_>>();
        prop_assert_eq!(tests(&ds), tests(&mixed));
        let before = ds.split_counts();
        let after = mixed.split_counts();
        prop_assert_eq!(after.train, before.train + moved);
        prop_assert_eq!(after.validation + moved, before.validation);
    }

    #[test]
    fn clip_norm_weights_average_one(counts in proptest::collection::vec(0u64..500, 2..40), picks in proptest::collection::vec(0usize..1000, 1..64)) {
        let table = PropensityTable::from_counts(&counts);
        let items: Vec<u32> = picks.iter().map(|p| (p % counts.len()) as u32).collect();
        for variant in [IpsVariant::ClipNorm, IpsVariant::ClipNormSmooth] {
            let w = ips_weights(&table, variant, 50.0, &items);
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            prop_assert!((mean - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
        }
        let total: f64 = table.propensities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_sigmoid_scores_rank_like_inner_products(seed in 0u64..500, user in 0u32..6) {
        let shape = ModelShape { dim: 4, user_confounder: true, item_confounder: true, alpha: 0.5, beta: 0.5, init_std: 0.5 };
        let model = ModelParams::init(6, 9, &shape, seed);
        let ctx = Contexts {
            user: (0..6).map(|u| vec![u % 9, (u + 3) % 9]).collect(),
            item: (0..9).map(|i| vec![i % 6]).collect(),
        };
        let scorer = Scorer::new(&model, &ctx).unwrap();
        let by_inner = top_k_from_scores(&scorer.inner_row(user), 9, &[]);
        let by_loglik = top_k_from_scores(&(0..9).map(|i| scorer.score(user, i)).collect::<Vec<_>>(), 9, &[]);
        prop_assert_eq!(&by_inner, &by_loglik);
        prop_assert_eq!(predict_topk(&scorer, user, 9, &[]), by_inner);
    }
}
