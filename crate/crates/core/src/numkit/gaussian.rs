use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `mu + exp(logvar / 2) ⊙ eps` — the reparameterized draw, with the noise
/// supplied by the caller so it can be frozen.
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

pub fn sample_gaussian<R: Rng + ?Sized>(mu: &[f64], sigma2: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if mu.len() != sigma2.len() {
        return Err(Error::Dimension(format!(
            "mean has {} entries, variance has {}",
            mu.len(),
            sigma2.len()
        )));
    }
    if let Some(bad) = sigma2.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Data(format!("variance must be positive and finite, got {bad}")));
    }
    Ok(mu
        .iter()
        .zip(sigma2)
        .map(|(m, s)| m + s.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

pub fn sample_gaussian_logvar<R: Rng + ?Sized>(mu: &[f64], logvar: &[f64], rng: &mut R) -> Vec<f64> {
    let eps = standard_normals(rng, mu.len());
    reparameterize(mu, logvar, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn vanishing_variance_returns_the_mean() {
        let mu = [0.3, -1.2, 4.0];
        let x = sample_gaussian_logvar(&mu, &[-30.0; 3], &mut stream(1, Stream::Noise));
        for (a, b) in x.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn million_draws_match_standard_moments() {
        let mut rng = stream(2, Stream::Noise);
        let n = 1_000_000;
        let x = sample_gaussian(&vec![0.0; n], &vec![1.0; n], &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn fixed_seed_fixed_sequence() {
        let a = sample_gaussian(&[0.0; 5], &[2.0; 5], &mut stream(9, Stream::Noise)).unwrap();
        let b = sample_gaussian(&[0.0; 5], &[2.0; 5], &mut stream(9, Stream::Noise)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonpositive_variance_is_rejected() {
        let mut rng = stream(0, Stream::Noise);
        assert!(sample_gaussian(&[0.0], &[0.0], &mut rng).is_err());
        assert!(sample_gaussian(&[0.0], &[-1.0], &mut rng).is_err());
    }
}
