use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Relative eigenvalue floor below which a covariance counts as singular.
const RANK_TOL: f64 = 1e-10;
const RIDGE: f64 = 1e-6;

fn centered(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("CCA inputs need equal, nonzero row widths".into()));
    }
    let mut m = DMatrix::from_fn(n, p, |r, c| rows[r][c]);
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(m)
}

/// `C^{-1/2}` of a covariance, with a ridge added when it is singular.
fn inverse_sqrt(cov: DMatrix<f64>, which: &str) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let ridge = if min <= RANK_TOL * max.max(f64::MIN_POSITIVE) {
        let r = RIDGE * max.max(1.0);
        log::info!("{which} covariance is rank-deficient; adding ridge {r:e}");
        r
    } else {
        0.0
    };
    let d = eig.eigenvalues.map(|l| 1.0 / (l.max(0.0) + ridge).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Canonical correlations between two row-aligned matrices, descending.
pub fn canonical_correlations(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("CCA over {} and {} rows", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Data("CCA needs at least two rows".into()));
    }
    let (x, y) = (centered(x)?, centered(y)?);
    let scale = 1.0 / (x.nrows() - 1) as f64;
    let cxx = x.transpose() * &x * scale;
    let cyy = y.transpose() * &y * scale;
    let cxy = x.transpose() * &y * scale;
    let m = inverse_sqrt(cxx, "learned") * cxy * inverse_sqrt(cyy, "true");
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest canonical correlation between learned posterior means and true
/// confounders of the same entities.
pub fn confounder_recovery_score(learned: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    Ok(canonical_correlations(learned, truth)?.first().copied().unwrap_or(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullSummary {
    pub mean: f64,
    pub sd: f64,
    pub scores: Vec<f64>,
}

/// Recovery scores after shuffling the learned rows, which breaks the
/// entity correspondence but keeps both marginal distributions.
pub fn permutation_null(learned: &[Vec<f64>], truth: &[Vec<f64>], permutations: usize, seed: u64) -> Result<NullSummary> {
    let mut rng = stream(seed, Stream::Evaluation);
    let mut order: Vec<usize> = (0..learned.len()).collect();
    let mut scores = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&r| learned[r].clone()).collect();
        scores.push(confounder_recovery_score(&shuffled, truth)?);
    }
    let n = scores.len().max(1) as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(NullSummary {
        mean,
        sd: var.sqrt(),
        scores,
    })
}
