//! Interaction contexts: the items a user interacted with (the user's
//! causes) and the users who interacted with an item (the item's causes),
//! always taken from the train split.

use rand::seq::index;
use rand::Rng;

use crate::dataio::{InteractionDataset, Split};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Contexts {
    /// `user[u]` = item indices.
    pub user: Vec<Vec<u32>>,
    /// `item[i]` = user indices.
    pub item: Vec<Vec<u32>>,
}

impl Contexts {
    /// Full train histories.
    pub fn full(ds: &InteractionDataset) -> Self {
        Self {
            user: ds.user_items(Split::Train),
            item: ds.item_users(Split::Train),
        }
    }

    /// Histories longer than `cap` are replaced by a uniform sample of
    /// `cap` entries without replacement.
    pub fn capped<R: Rng + ?Sized>(full: &Contexts, cap: usize, rng: &mut R) -> Self {
        let mut shrink = |lists: &[Vec<u32>]| -> Vec<Vec<u32>> {
            lists
                .iter()
                .map(|l| {
                    if l.len() <= cap {
                        l.clone()
                    } else {
                        let mut picked: Vec<u32> = index::sample(rng, l.len(), cap).into_iter().map(|k| l[k]).collect();
                        picked.sort_unstable();
                        picked
                    }
                })
                .collect()
        };
        let user = shrink(&full.user);
        let item = shrink(&full.item);
        Self { user, item }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{IdMap, Interaction};
    use crate::rng::{stream, Stream};

    #[test]
    fn only_train_rows_and_cap_respected() {
        let mut interactions = Vec::new();
        for i in 0..10 {
            interactions.push(Interaction { user: 0, item: i, split: Split::Train });
        }
        interactions.push(Interaction { user: 1, item: 3, split: Split::Test });
        interactions.push(Interaction { user: 1, item: 4, split: Split::Train });
        let ds = InteractionDataset {
            users: IdMap::numeric(2),
            items: IdMap::numeric(10),
            interactions,
        };
        let full = Contexts::full(&ds);
        assert_eq!(full.user[1], vec![4]);
        assert_eq!(full.item[3], vec![0]);
        let capped = Contexts::capped(&full, 4, &mut stream(1, Stream::Context));
        assert_eq!(capped.user[0].len(), 4);
        assert!(capped.user[0].windows(2).all(|w| w[0] < w[1]));
        assert_eq!(capped.user[1], vec![4]);
        let again = Contexts::capped(&full, 4, &mut stream(1, Stream::Context));
        assert_eq!(capped, again);
    }
}
