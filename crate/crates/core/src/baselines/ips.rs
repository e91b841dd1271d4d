use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpsVariant {
    Plain,
    Clip,
    ClipNorm,
    ClipNormSmooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpsConfig {
    pub variant: IpsVariant,
    pub clip_max: f64,
}

impl IpsConfig {
    pub fn new(variant: IpsVariant) -> Self {
        Self { variant, clip_max: 1000.0 }
    }
}

/// Train-split item popularity with propensities `count / total`.
/// Counts are floored at 1 so every weight stays finite.
#[derive(Clone, Debug, PartialEq)]
pub struct PropensityTable {
    counts: Vec<u64>,
    propensity: Vec<f64>,
}

impl PropensityTable {
    pub fn from_counts(counts: &[u64]) -> Self {
        let counts: Vec<u64> = counts.iter().map(|&c| c.max(1)).collect();
        let total: f64 = counts.iter().map(|&c| c as f64).sum();
        let propensity = counts.iter().map(|&c| c as f64 / total).collect();
        Self { counts, propensity }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, item: u32) -> u64 {
        self.counts[item as usize]
    }

    pub fn propensity(&self, item: u32) -> f64 {
        self.propensity[item as usize]
    }

    pub fn propensities(&self) -> &[f64] {
        &self.propensity
    }

    /// Unclipped inverse propensity.
    pub fn weight(&self, item: u32) -> f64 {
        1.0 / self.propensity[item as usize]
    }
}

fn validate_clip(clip_max: f64) -> Result<()> {
    if clip_max > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("clip_max must be positive, got {clip_max}")))
    }
}

/// Weights of the positive items of one batch.
pub fn ips_weights(table: &PropensityTable, variant: IpsVariant, clip_max: f64, items: &[u32]) -> Vec<f64> {
    let raw = items.iter().map(|&i| table.weight(i));
    let clip = |w: f64| w.min(clip_max);
    let mut w: Vec<f64> = match variant {
        IpsVariant::Plain => raw.collect(),
        IpsVariant::Clip | IpsVariant::ClipNorm => raw.map(clip).collect(),
        IpsVariant::ClipNormSmooth => raw.map(|w| clip(w).sqrt()).collect(),
    };
    if matches!(variant, IpsVariant::ClipNorm | IpsVariant::ClipNormSmooth) && !w.is_empty() {
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        w.iter_mut().for_each(|x| *x /= mean);
    }
    w
}

/// Rejects configurations that would produce nonpositive weights.
pub fn check_ips(cfg: &IpsConfig) -> Result<()> {
    match cfg.variant {
        IpsVariant::Plain => Ok(()),
        _ => validate_clip(cfg.clip_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [IpsVariant; 4] = [IpsVariant::Plain, IpsVariant::Clip, IpsVariant::ClipNorm, IpsVariant::ClipNormSmooth];

    #[test]
    fn uniform_popularity_gives_equal_weights() {
        let table = PropensityTable::from_counts(&[5; 8]);
        let items = [0, 3, 7, 2];
        for v in ALL {
            let w = ips_weights(&table, v, 1000.0, &items);
            assert!(w.iter().all(|&x| x == w[0]), "{v:?}");
            if matches!(v, IpsVariant::ClipNorm | IpsVariant::ClipNormSmooth) {
                assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn plain_weights_from_counts() {
        let table = PropensityTable::from_counts(&[1, 9]);
        let w = ips_weights(&table, IpsVariant::Plain, 1000.0, &[0, 1]);
        assert!((w[0] - 10.0).abs() < 1e-12);
        assert!((w[1] - 10.0 / 9.0).abs() < 1e-12);
        assert!((table.propensities().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saturated_clip() {
        let table = PropensityTable::from_counts(&[1, 9, 4]);
        let items = [0, 1, 2, 1];
        let w = ips_weights(&table, IpsVariant::Clip, 0.5, &items);
        assert!(w.iter().all(|&x| x == 0.5));
        let w = ips_weights(&table, IpsVariant::ClipNorm, 0.5, &items);
        assert!(w.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn zero_count_is_floored() {
        let table = PropensityTable::from_counts(&[0, 3]);
        assert_eq!(table.count(0), 1);
        assert!((table.weight(0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn clip_max_checked() {
        assert!(check_ips(&IpsConfig { variant: IpsVariant::Clip, clip_max: 0.0 }).is_err());
        assert!(check_ips(&IpsConfig { variant: IpsVariant::Plain, clip_max: 0.0 }).is_ok());
    }
}
