use crate::error::{Error, Result};

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Config("K must be positive".into()))
    } else {
        Ok(())
    }
}

/// Number of the first `k` recommendations present in the sorted `truth`.
fn hits(recs: &[u32], truth: &[u32], k: usize) -> usize {
    recs.iter()
        .take(k)
        .filter(|i| truth.binary_search(i).is_ok())
        .count()
}

/// Mean over users with at least one positive; 0 when there are none.
fn mean_over_judged<F: Fn(&[u32], &[u32]) -> f64>(recs: &[Vec<u32>], truth: &[Vec<u32>], f: F) -> f64 {
    let (sum, n) = recs
        .iter()
        .zip(truth)
        .filter(|(_, t)| !t.is_empty())
        .fold((0.0, 0usize), |(s, n), (r, t)| (s + f(r, t), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `truth[u]` must be sorted ascending.
pub fn recall_at_k(recs: &[Vec<u32>], truth: &[Vec<u32>], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean_over_judged(recs, truth, |r, t| hits(r, t, k) as f64 / t.len() as f64))
}

pub fn hr_at_k(recs: &[Vec<u32>], truth: &[Vec<u32>], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean_over_judged(recs, truth, |r, t| (hits(r, t, k) > 0) as u8 as f64))
}

pub fn ndcg_at_k(recs: &[Vec<u32>], truth: &[Vec<u32>], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean_over_judged(recs, truth, |r, t| {
        let dcg: f64 = r
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, i)| t.binary_search(i).is_ok())
            .map(|(rank, _)| 1.0 / (rank as f64 + 2.0).log2())
            .sum();
        let idcg: f64 = (0..t.len().min(k)).map(|rank| 1.0 / (rank as f64 + 2.0).log2()).sum();
        dcg / idcg
    }))
}

/// The `k` most popular items, ties by ascending index.
pub fn popular_items(popularity: &[u64], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..popularity.len() as u32).collect();
    idx.sort_by(|&a, &b| popularity[b as usize].cmp(&popularity[a as usize]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Mean Jaccard overlap between each user's top `k` and the `k` most
/// popular train items. Every ranked user counts, with or without
/// ground truth.
pub fn iou_at_k(recs: &[Vec<u32>], popularity: &[u64], k: usize) -> Result<f64> {
    check_k(k)?;
    if k > popularity.len() {
        return Err(Error::Config(format!("K = {k} exceeds {} items", popularity.len())));
    }
    if recs.is_empty() {
        return Ok(0.0);
    }
    let mut popular = popular_items(popularity, k);
    popular.sort_unstable();
    let total: f64 = recs
        .iter()
        .map(|r| {
            let top = &r[..r.len().min(k)];
            let inter = hits(top, &popular, k);
            let union = top.len() + popular.len() - inter;
            inter as f64 / union as f64
        })
        .sum();
    Ok(total / recs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_single_hit() {
        let recs = vec![vec![7, 1, 2]];
        let truth = vec![vec![7]];
        for k in 1..=3 {
            assert_eq!(recall_at_k(&recs, &truth, k).unwrap(), 1.0);
            assert_eq!(hr_at_k(&recs, &truth, k).unwrap(), 1.0);
            assert_eq!(ndcg_at_k(&recs, &truth, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn hit_at_rank_three_discount() {
        let recs = vec![vec![4, 5, 6]];
        let truth = vec![vec![6]];
        assert_eq!(ndcg_at_k(&recs, &truth, 3).unwrap(), 0.5);
        assert_eq!(recall_at_k(&recs, &truth, 2).unwrap(), 0.0);
    }

    #[test]
    fn users_without_truth_are_skipped() {
        let recs = vec![vec![1, 2], vec![3, 4]];
        let truth = vec![vec![], vec![3]];
        assert_eq!(recall_at_k(&recs, &truth, 1).unwrap(), 1.0);
        assert_eq!(hr_at_k(&recs, &[vec![], vec![]], 1).unwrap(), 0.0);
    }

    #[test]
    fn zero_k_is_config_error() {
        assert!(recall_at_k(&[], &[], 0).is_err());
        assert!(iou_at_k(&[], &[1], 0).is_err());
        assert!(iou_at_k(&[], &[1], 2).is_err());
    }

    #[test]
    fn iou_identity_disjoint_and_partial() {
        // popularity: items 2,3,4,5 most popular in that order
        let pop = [0, 0, 9, 8, 7, 6, 1, 1];
        let p4 = popular_items(&pop, 4);
        assert_eq!(p4, vec![2, 3, 4, 5]);
        assert_eq!(iou_at_k(&[p4.clone()], &pop, 4).unwrap(), 1.0);
        assert_eq!(iou_at_k(&[vec![0, 1, 6, 7]], &pop, 4).unwrap(), 0.0);
        // {a,b,c,d} = {0,1,2,3}, P_4 = {2,3,4,5}: 2 / 6
        let v = iou_at_k(&[vec![0, 1, 2, 3]], &pop, 4).unwrap();
        assert!((v - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn popularity_ties_by_index() {
        assert_eq!(popular_items(&[3, 5, 5, 3], 3), vec![1, 2, 0]);
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_monotone_in_k(
            recs in proptest::collection::vec(proptest::sample::subsequence((0u32..20).collect::<Vec<_>>(), 10), 1..8),
            truth_raw in proptest::collection::vec(proptest::collection::btree_set(0u32..20, 0..5), 8),
        ) {
            let recs: Vec<Vec<u32>> = recs;
            let truth: Vec<Vec<u32>> = truth_raw.into_iter().take(recs.len()).map(|s| s.into_iter().collect()).collect();
            let mut last = (0.0, 0.0);
            for k in 1..=10 {
                let r = recall_at_k(&recs, &truth, k).unwrap();
                let h = hr_at_k(&recs, &truth, k).unwrap();
                let n = ndcg_at_k(&recs, &truth, k).unwrap();
                for v in [r, h, n] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(r >= last.0 && h >= last.1);
                last = (r, h);
            }
        }
    }
}
