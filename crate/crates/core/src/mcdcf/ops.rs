//! Closed-form pieces of the objective, usable on their own.

use crate::numkit::linalg::{dot, log_sigmoid, softplus};

/// Diagonal Gaussian `N(mu, exp(logvar))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl GaussianPosterior {
    pub fn from_variance(mu: Vec<f64>, sigma2: &[f64]) -> Self {
        Self {
            mu,
            logvar: sigma2.iter().map(|s| s.ln()).collect(),
        }
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.logvar.iter().map(|l| l.exp()).collect()
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// `KL(N(mu, σ²) ‖ N(0, I))` for a diagonal Gaussian.
pub fn kl_to_standard_normal(post: &GaussianPosterior) -> f64 {
    kl_from_moments(&post.mu, &post.sigma2())
}

pub(crate) fn kl_from_moments(mu: &[f64], sigma2: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(sigma2)
        .map(|(m, s)| m * m + s - s.ln() - 1.0)
        .sum::<f64>()
}

/// Squared Euclidean distance between an entity's embedding and its
/// reconstruction.
pub fn squared_error(base: &[f64], reconstruction: &[f64]) -> f64 {
    base.iter()
        .zip(reconstruction)
        .map(|(b, r)| (b - r) * (b - r))
        .sum()
}

/// Reconstruction and KL terms of one entity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EntityElbo {
    pub reconstruction: f64,
    pub kl: f64,
}

/// Minimization form of the two-sided objective:
/// `½[(L_u + KL_u) + (L_i + KL_i)]`, averaged over the batch.
pub fn elbo_loss(users: &[EntityElbo], items: &[EntityElbo]) -> f64 {
    assert_eq!(users.len(), items.len(), "user and item terms must pair up");
    if users.is_empty() {
        return 0.0;
    }
    let sum: f64 = users
        .iter()
        .zip(items)
        .map(|(u, i)| 0.5 * (u.reconstruction + u.kl + i.reconstruction + i.kl))
        .sum();
    sum / users.len() as f64
}

/// `base + weight * confounder`
pub fn fuse(base: &[f64], confounder: &[f64], weight: f64) -> Vec<f64> {
    base.iter().zip(confounder).map(|(b, x)| b + weight * x).collect()
}

/// `ln σ(⟨f, k⟩)`
pub fn score(f: &[f64], k: &[f64]) -> f64 {
    log_sigmoid(dot(f, k))
}

/// One pairwise term `-ln σ(⟨f, k_pos⟩ - ⟨f, i_neg⟩)`.
pub fn bpr_term(f: &[f64], k_pos: &[f64], raw_neg: &[f64]) -> f64 {
    softplus(-(dot(f, k_pos) - dot(f, raw_neg)))
}

/// Batch mean of [`bpr_term`]; the positive side is fused, the negative
/// side is the raw item embedding.
pub fn bpr_click_loss(f: &[Vec<f64>], k_pos: &[Vec<f64>], raw_neg: &[Vec<f64>]) -> f64 {
    assert!(f.len() == k_pos.len() && f.len() == raw_neg.len());
    if f.is_empty() {
        return 0.0;
    }
    f.iter()
        .zip(k_pos)
        .zip(raw_neg)
        .map(|((f, k), n)| bpr_term(f, k, n))
        .sum::<f64>()
        / f.len() as f64
}
