//! Top-K evaluation: Recall, HR, NDCG and the popularity-overlap IOU.

mod curves;
mod metrics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{InteractionDataset, Split};
use crate::error::{Error, Result};

pub use curves::{emit_curves, emit_curves_jsonl, parse_curves, CurveAxis, CurvePoint, CurveRow};
pub use metrics::{hr_at_k, iou_at_k, ndcg_at_k, popular_items, recall_at_k};

/// Anything that can produce a ranked list of items for a user.
pub trait Ranker {
    fn num_items(&self) -> usize;

    /// Top `k` items by descending score, ties broken by ascending index,
    /// never containing anything in `exclude` (sorted ascending).
    fn top_k(&self, user: u32, k: usize, exclude: &[u32]) -> Vec<u32>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: f64,
    pub hr: f64,
    pub ndcg: f64,
    pub iou: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["recall", "hr", "ndcg", "iou"];

    pub fn values(&self) -> [f64; 4] {
        [self.recall, self.hr, self.ndcg, self.iou]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: String,
    pub seed: u64,
    pub dataset: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub at: BTreeMap<usize, Metrics>,
    /// Users with at least one ground-truth positive (recall/HR/NDCG).
    pub evaluated_users: usize,
    /// Users ranked at all (IOU).
    pub ranked_users: usize,
    pub num_users: usize,
    pub meta: RunMeta,
}

impl MetricReport {
    pub fn get(&self, k: usize) -> Option<&Metrics> {
        self.at.get(&k)
    }

    /// Tab-separated table with a header row, one line per cutoff.
    pub fn to_table(&self) -> String {
        let mut out = String::from("method\tseed\tdataset\tconfig_hash\tk\trecall\thr\tndcg\tiou\tevaluated_users\n");
        for (k, m) in &self.at {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{k}\t{}\t{}\t{}\t{}\t{}\n",
                self.meta.method,
                self.meta.seed,
                self.meta.dataset,
                self.meta.config_hash,
                m.recall,
                m.hr,
                m.ndcg,
                m.iou,
                self.evaluated_users
            ));
        }
        out
    }
}

/// Ranks every user that has train interactions and scores the rankings
/// against `target` positives. Train positives are excluded from ranking.
pub fn evaluate<R: Ranker + ?Sized>(ranker: &R, ds: &InteractionDataset, target: Split, ks: &[usize], meta: RunMeta) -> Result<MetricReport> {
    let max_k = *ks
        .iter()
        .max()
        .ok_or_else(|| Error::Config("at least one cutoff is required".into()))?;
    if ks.contains(&0) {
        return Err(Error::Config("cutoffs must be positive".into()));
    }
    if max_k > ds.num_items() {
        return Err(Error::Config(format!(
            "cutoff {max_k} exceeds the {} available items",
            ds.num_items()
        )));
    }
    let train = ds.user_items(Split::Train);
    let truth_all = ds.user_items(target);
    let mut recs = Vec::new();
    let mut truth = Vec::new();
    for (u, seen) in train.iter().enumerate() {
        if seen.is_empty() {
            continue;
        }
        recs.push(ranker.top_k(u as u32, max_k, seen));
        truth.push(truth_all[u].clone());
    }
    let popularity = ds.item_popularity();
    let mut at = BTreeMap::new();
    for &k in ks {
        at.insert(
            k,
            Metrics {
                recall: recall_at_k(&recs, &truth, k)?,
                hr: hr_at_k(&recs, &truth, k)?,
                ndcg: ndcg_at_k(&recs, &truth, k)?,
                iou: iou_at_k(&recs, &popularity, k)?,
            },
        );
    }
    Ok(MetricReport {
        ks: ks.to_vec(),
        at,
        evaluated_users: truth.iter().filter(|t| !t.is_empty()).count(),
        ranked_users: recs.len(),
        num_users: ds.num_users(),
        meta,
    })
}

/// Top-K ranking over a dense score row. Excluded items are skipped.
pub fn top_k_from_scores(scores: &[f64], k: usize, exclude: &[u32]) -> Vec<u32> {
    let mut cand: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(&(*i as u32)).is_err())
        .map(|(i, &s)| (s, i as u32))
        .collect();
    let better = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, better);
        cand.truncate(k);
    }
    cand.sort_unstable_by(better);
    cand.into_iter().map(|(_, i)| i).collect()
}
