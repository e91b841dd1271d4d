//! The confounder-aware recommender: per-side variational encoders over
//! interaction contexts, decoders, additive fusion and pairwise training.

mod context;
mod infer;
mod model;
mod ops;
mod sampler;
mod train;

pub use context::Contexts;
pub use infer::{posteriors, predict_topk, Scorer};
pub use model::{BatchInput, BatchNoise, LossBreakdown, ModelParams, ModelShape, Side, TrainingTriple};
pub use ops::{bpr_click_loss, bpr_term, elbo_loss, fuse, kl_to_standard_normal, score, squared_error, EntityElbo, GaussianPosterior};
pub use sampler::{NegativeSampler, NegativeSampling};
pub use train::{split_recall, train, EpochRecord, TrainConfig, TrainError, TrainOutcome};
