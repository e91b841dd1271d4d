use std::collections::VecDeque;

use super::{IdMap, Interaction, InteractionDataset, PositivePair, Split};
use crate::error::{Error, Result};

/// Maximal bipartite k-core: repeatedly drops users and items with fewer
/// than `k` interactions. Survivors are reindexed densely in order of first
/// appearance; every interaction is tagged `train`.
pub fn kcore_filter(pairs: &[PositivePair], k: usize) -> Result<InteractionDataset> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
    {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for p in pairs {
            let e = (users.intern(&p.user_id), items.intern(&p.item_id));
            if seen.insert(e) {
                edges.push(e);
            }
        }
    }
    let (nu, ni) = (users.len(), items.len());

    // Node ids: users [0, nu), items [nu, nu + ni).
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nu + ni];
    for (e, &(u, i)) in edges.iter().enumerate() {
        adj[u as usize].push(e);
        adj[nu + i as usize].push(e);
    }
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut node_alive = vec![true; nu + ni];
    let mut edge_alive = vec![true; edges.len()];

    let mut queue: VecDeque<usize> = (0..nu + ni).filter(|&n| degree[n] < k).collect();
    for &n in &queue {
        node_alive[n] = false;
    }
    while let Some(n) = queue.pop_front() {
        for &e in &adj[n] {
            if !edge_alive[e] {
                continue;
            }
            edge_alive[e] = false;
            let (u, i) = edges[e];
            let other = if n < nu { nu + i as usize } else { u as usize };
            degree[other] -= 1;
            if node_alive[other] && degree[other] < k {
                node_alive[other] = false;
                queue.push_back(other);
            }
        }
    }

    if !edge_alive.iter().any(|&a| a) {
        return Err(Error::EmptyKCore { k });
    }
    let (users_out, user_remap) = users.compact(&node_alive[..nu]);
    let (items_out, item_remap) = items.compact(&node_alive[nu..]);
    let interactions = edges
        .iter()
        .zip(&edge_alive)
        .filter(|(_, &alive)| alive)
        .map(|(&(u, i), _)| Interaction {
            user: user_remap[u as usize].expect("alive edge has alive user"),
            item: item_remap[i as usize].expect("alive edge has alive item"),
            split: Split::Train,
        })
        .collect();
    log::info!(
        "{k}-core: {} -> {} users, {} -> {} items",
        nu,
        users_out.len(),
        ni,
        items_out.len()
    );
    Ok(InteractionDataset {
        users: users_out,
        items: items_out,
        interactions,
    })
}
