//! Rating ingestion, binarization, k-core filtering and the
//! biased-train / unbiased-validation / unbiased-test protocol.

mod format;
mod kcore;
mod load;
mod split;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;

pub use format::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, DATASET_HEADER};
pub use kcore::kcore_filter;
pub use load::{binarize, load_ratings, load_ratings_from, ColumnRef, ColumnSpec, LoadReport, ParseMode, PositivePair, RawRating};
pub(crate) use split::drop_entities_without_train;
pub use split::{intervention_mix, split_biased_unbiased, SplitConfig, SplitReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub split: Split,
}

/// Dense bidirectional map between opaque string keys and 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `key`, assigning the next free index on first sight.
    pub fn intern(&mut self, key: &str) -> u32 {
        if let Some(&idx) = self.index.get(key) {
            return idx;
        }
        let idx = self.keys.len() as u32;
        self.keys.push(key.to_owned());
        self.index.insert(key.to_owned(), idx);
        idx
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, idx: u32) -> &str {
        &self.keys[idx as usize]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Map whose keys are the decimal indices themselves.
    pub fn numeric(n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    /// Keep only the indices flagged in `keep`, renumbering densely in
    /// ascending old-index order. Returns the old→new remap.
    pub(crate) fn compact(&self, keep: &[bool]) -> (IdMap, Vec<Option<u32>>) {
        let mut out = IdMap::new();
        let remap = keep
            .iter()
            .enumerate()
            .map(|(old, &k)| k.then(|| out.intern(&self.keys[old])))
            .collect();
        (out, remap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDataset {
    pub users: IdMap,
    pub items: IdMap,
    pub interactions: Vec<Interaction>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

impl InteractionDataset {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn split_counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for it in &self.interactions {
            match it.split {
                Split::Train => c.train += 1,
                Split::Validation => c.validation += 1,
                Split::Test => c.test += 1,
            }
        }
        c
    }

    pub fn pairs(&self, split: Split) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.interactions
            .iter()
            .filter(move |it| it.split == split)
            .map(|it| (it.user, it.item))
    }

    /// Per-user sorted item lists for one split.
    pub fn user_items(&self, split: Split) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_users()];
        for (u, i) in self.pairs(split) {
            out[u as usize].push(i);
        }
        for items in &mut out {
            items.sort_unstable();
        }
        out
    }

    /// Per-item sorted user lists for one split.
    pub fn item_users(&self, split: Split) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_items()];
        for (u, i) in self.pairs(split) {
            out[i as usize].push(u);
        }
        for users in &mut out {
            users.sort_unstable();
        }
        out
    }

    /// Train-split interaction count per item.
    pub fn item_popularity(&self) -> Vec<u64> {
        let mut pop = vec![0u64; self.num_items()];
        for (_, i) in self.pairs(Split::Train) {
            pop[i as usize] += 1;
        }
        pop
    }

    /// Hex SHA-256 over the dataset's canonical file encoding.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        write_dataset_to(self, &mut buf).expect("writing to a Vec cannot fail");
        hex_digest(&buf)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (nu, ni) = (self.num_users() as u32, self.num_items() as u32);
        let mut seen: HashSet<(u32, u32, Split)> = HashSet::with_capacity(self.len());
        for it in &self.interactions {
            if it.user >= nu || it.item >= ni {
                return Err(Error::Data(format!(
                    "interaction ({}, {}) out of range for {nu} users / {ni} items",
                    it.user, it.item
                )));
            }
            if !seen.insert((it.user, it.item, it.split)) {
                return Err(Error::Data(format!(
                    "duplicate pair ({}, {}) in {} split",
                    it.user, it.item, it.split
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_map_is_a_bijection() {
        let mut map = IdMap::new();
        for key in ["b", "a", "c", "a"] {
            map.intern(key);
        }
        assert_eq!(map.len(), 3);
        for idx in 0..map.len() as u32 {
            assert_eq!(map.get(map.key(idx)), Some(idx));
        }
    }

    #[test]
    fn validate_rejects_duplicates_within_a_split() {
        let ds = InteractionDataset {
            users: IdMap::numeric(1),
            items: IdMap::numeric(1),
            interactions: vec![
                Interaction { user: 0, item: 0, split: Split::Train },
                Interaction { user: 0, item: 0, split: Split::Train },
            ],
        };
        assert!(matches!(ds.validate(), Err(Error::Data(_))));
    }
}
