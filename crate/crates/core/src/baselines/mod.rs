//! Reference methods: BPR matrix factorization and inverse-propensity
//! reweighting of its positive terms.

mod ips;

pub use ips::{check_ips, ips_weights, IpsConfig, IpsVariant, PropensityTable};

use crate::dataio::InteractionDataset;
use crate::mcdcf::{train, TrainConfig, TrainError, TrainOutcome};

/// `cfg` with all confounder machinery removed.
pub fn mf_config(cfg: &TrainConfig) -> TrainConfig {
    TrainConfig {
        alpha: 0.0,
        beta: 0.0,
        elbo_weight: 0.0,
        user_confounder: false,
        item_confounder: false,
        ..cfg.clone()
    }
}

/// BPR matrix factorization through the shared trainer. Optimizer, batch,
/// dimension, sampler and IPS settings are taken from `cfg`.
pub fn train_mf_bpr(ds: &InteractionDataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train(ds, &mf_config(cfg))
}
