//! Deterministic inference: confounders are replaced by posterior means
//! computed from full train histories.

use super::context::Contexts;
use super::model::{ModelParams, Side};
use super::ops::GaussianPosterior;
use crate::error::{Error, Result};
use crate::eval::{top_k_from_scores, Ranker};
use crate::numkit::linalg::{dot, log_sigmoid};

/// Posterior of every entity on `side`; entities without history get the
/// prior `N(0, I)`.
pub fn posteriors(model: &ModelParams, side: Side, ctx: &Contexts) -> Result<Vec<GaussianPosterior>> {
    let lists = match side {
        Side::User => &ctx.user,
        Side::Item => &ctx.item,
    };
    lists
        .iter()
        .map(|l| {
            if l.is_empty() {
                Ok(GaussianPosterior {
                    mu: vec![0.0; model.dim()],
                    logvar: vec![0.0; model.dim()],
                })
            } else {
                model.encode(side, l)
            }
        })
        .collect()
}

/// Fused user and item representations, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Scorer {
    dim: usize,
    num_items: usize,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl Scorer {
    pub fn new(model: &ModelParams, ctx: &Contexts) -> Result<Self> {
        if ctx.user.len() != model.num_users() || ctx.item.len() != model.num_items() {
            return Err(Error::Dimension(format!(
                "model covers {} users / {} items, contexts cover {} / {}",
                model.num_users(),
                model.num_items(),
                ctx.user.len(),
                ctx.item.len()
            )));
        }
        let fused = |side: Side, weight: f64| -> Result<Vec<f64>> {
            let mut table = match side {
                Side::User => model.user_embeddings().values.clone(),
                Side::Item => model.item_embeddings().values.clone(),
            };
            if model.has_confounder(side) && weight != 0.0 {
                let d = model.dim();
                for (row, post) in posteriors(model, side, ctx)?.iter().enumerate() {
                    for (t, m) in table[row * d..(row + 1) * d].iter_mut().zip(&post.mu) {
                        *t += weight * m;
                    }
                }
            }
            Ok(table)
        };
        Ok(Self {
            dim: model.dim(),
            num_items: model.num_items(),
            users: fused(Side::User, model.alpha())?,
            items: fused(Side::Item, model.beta())?,
        })
    }

    pub fn user_repr(&self, u: u32) -> &[f64] {
        &self.users[u as usize * self.dim..(u as usize + 1) * self.dim]
    }

    pub fn item_repr(&self, i: u32) -> &[f64] {
        &self.items[i as usize * self.dim..(i as usize + 1) * self.dim]
    }

    pub fn inner(&self, u: u32, i: u32) -> f64 {
        dot(self.user_repr(u), self.item_repr(i))
    }

    /// `ln σ(⟨f_u, k_i⟩)`
    pub fn score(&self, u: u32, i: u32) -> f64 {
        log_sigmoid(self.inner(u, i))
    }

    /// Inner products of `u` against every item.
    pub fn inner_row(&self, u: u32) -> Vec<f64> {
        let f = self.user_repr(u);
        self.items.chunks_exact(self.dim).map(|k| dot(f, k)).collect()
    }
}

impl Ranker for Scorer {
    fn num_items(&self) -> usize {
        self.num_items
    }

    /// Ranks by the inner product, which orders items exactly as the
    /// log-sigmoid score does.
    fn top_k(&self, user: u32, k: usize, exclude: &[u32]) -> Vec<u32> {
        top_k_from_scores(&self.inner_row(user), k, exclude)
    }
}

/// Top `k` items for `user`, never returning anything in `exclude`
/// (sorted). Fewer than `k` are returned when candidates run out.
pub fn predict_topk(scorer: &Scorer, user: u32, k: usize, exclude: &[u32]) -> Vec<u32> {
    scorer.top_k(user, k, exclude)
}
