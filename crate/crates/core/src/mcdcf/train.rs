use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::context::Contexts;
use super::infer::Scorer;
use super::model::{BatchInput, BatchNoise, LossBreakdown, ModelParams, ModelShape, TrainingTriple};
use super::sampler::{NegativeSampler, NegativeSampling};
use crate::baselines::{check_ips, ips_weights, IpsConfig, PropensityTable};
use crate::dataio::{InteractionDataset, Split};
use crate::error::Error;
use crate::eval::{recall_at_k, Ranker};
use crate::numkit::{adam_step, AdamState};
use crate::rng::{stream, substream, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier of the ELBO term; 1 gives the plain sum of both losses.
    pub elbo_weight: f64,
    pub user_confounder: bool,
    pub item_confounder: bool,
    pub context_cap: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; `None`
    /// trains for all epochs.
    pub patience: Option<usize>,
    /// Cutoff of the validation recall used for model selection.
    pub eval_k: usize,
    pub negatives: NegativeSampling,
    pub ips: Option<IpsConfig>,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            alpha: 0.5,
            beta: 0.5,
            elbo_weight: 1.0,
            user_confounder: true,
            item_confounder: true,
            context_cap: 64,
            lr: 0.01,
            batch_size: 128,
            epochs: 100,
            patience: Some(10),
            eval_k: 20,
            negatives: NegativeSampling::Pnsm { margin: 10.0 },
            ips: None,
            init_std: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn shape(&self) -> ModelShape {
        ModelShape {
            dim: self.dim,
            user_confounder: self.user_confounder,
            item_confounder: self.item_confounder,
            alpha: self.alpha,
            beta: self.beta,
            init_std: self.init_std,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 || self.batch_size == 0 || self.context_cap == 0 || self.eval_k == 0 {
            return bad("dim, batch_size, context_cap and eval_k must be positive");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(self.elbo_weight >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return bad("elbo_weight must be nonnegative and fusion weights finite");
        }
        if let NegativeSampling::Pnsm { margin } = self.negatives {
            if margin.is_nan() {
                return bad("PNSM margin must not be NaN");
            }
        }
        if let Some(ips) = &self.ips {
            check_ips(ips)?;
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_click: f64,
    pub l_elbo: f64,
    pub l_total: f64,
    pub val_recall: Option<f64>,
    pub wall_secs: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (or the last epoch when no
    /// validation rows exist).
    pub model: ModelParams,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged in epoch {epoch}: {source}")]
    Diverged {
        epoch: usize,
        #[source]
        source: Error,
        last_good: Box<ModelParams>,
    },
    #[error(transparent)]
    Failed(#[from] Error),
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { epoch, source, .. } => {
                Error::NonFinite(format!("training diverged in epoch {epoch}: {source}"))
            }
            TrainError::Failed(e) => e,
        }
    }
}

/// Validation recall of `ranker` at `k`, excluding train positives.
pub fn split_recall<R: Ranker + ?Sized>(ranker: &R, train: &[Vec<u32>], target: &[Vec<u32>], k: usize) -> Result<f64, Error> {
    let mut recs = Vec::new();
    let mut truth = Vec::new();
    for (u, t) in target.iter().enumerate() {
        if t.is_empty() || train[u].is_empty() {
            continue;
        }
        recs.push(ranker.top_k(u as u32, k, &train[u]));
        truth.push(t.clone());
    }
    recall_at_k(&recs, &truth, k)
}

/// Mini-batch training with Adam, one reparameterized sample per entity
/// and step, and early stopping on validation recall.
pub fn train(ds: &InteractionDataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let pairs: Vec<(u32, u32)> = ds.pairs(Split::Train).collect();
    if pairs.is_empty() {
        return Err(Error::Data("train split is empty".into()).into());
    }
    let full_ctx = Contexts::full(ds);
    let validation = ds.user_items(Split::Validation);
    let has_validation = validation.iter().any(|v| !v.is_empty());
    let popularity = ds.item_popularity();
    let propensity = cfg.ips.as_ref().map(|_| PropensityTable::from_counts(&popularity));
    let sampler = NegativeSampler::new(cfg.negatives, full_ctx.user.clone(), popularity);
    let uses_context = cfg.user_confounder || cfg.item_confounder;

    let mut model = ModelParams::init(ds.num_users(), ds.num_items(), &cfg.shape(), cfg.seed);
    let mut adam = AdamState::new(&model.params, cfg.lr);
    let mut neg_rng = stream(cfg.seed, Stream::Negatives);
    let mut noise_rng = stream(cfg.seed, Stream::Noise);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let started = Instant::now();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(cfg.seed, Stream::Shuffle, epoch as u64));
        let ctx = if uses_context {
            Contexts::capped(&full_ctx, cfg.context_cap, &mut substream(cfg.seed, Stream::Context, epoch as u64))
        } else {
            Contexts::default()
        };
        let mut sums = LossBreakdown::default();
        for chunk in order.chunks(cfg.batch_size) {
            let triples = chunk
                .iter()
                .map(|&k| {
                    let (user, pos) = pairs[k];
                    Ok(TrainingTriple {
                        user,
                        pos,
                        neg: sampler.sample(user, pos, &mut neg_rng)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let weights = match (&cfg.ips, &propensity) {
                (Some(ips), Some(table)) => {
                    let items: Vec<u32> = triples.iter().map(|t| t.pos).collect();
                    Some(ips_weights(table, ips.variant, ips.clip_max, &items))
                }
                _ => None,
            };
            let noise = if uses_context {
                BatchNoise::draw(&mut noise_rng, triples.len(), cfg.dim)
            } else {
                BatchNoise::zeros(triples.len(), cfg.dim)
            };
            let input = BatchInput {
                triples: &triples,
                weights: weights.as_deref(),
                noise: &noise,
                elbo_weight: cfg.elbo_weight,
            };
            let step = model
                .accumulate_grad(&ctx, &input)
                .and_then(|loss| adam_step(&mut model.params, &mut adam).map(|_| loss));
            let loss = match step {
                Ok(loss) => loss,
                Err(source) => {
                    let last_good = best.map(|b| b.2).unwrap_or_else(|| model.clone());
                    return Err(TrainError::Diverged {
                        epoch,
                        source,
                        last_good: Box::new(last_good),
                    });
                }
            };
            let n = triples.len() as f64;
            sums.click += loss.click * n;
            sums.elbo += loss.elbo * n;
            sums.total += loss.total * n;
        }
        let n = pairs.len() as f64;
        let val_recall = if has_validation {
            let scorer = Scorer::new(&model, &full_ctx)?;
            Some(split_recall(&scorer, &full_ctx.user, &validation, cfg.eval_k)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            l_click: sums.click / n,
            l_elbo: sums.elbo / n,
            l_total: sums.total / n,
            val_recall,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        log::debug!("{record:?}");
        log.push(record);

        if let Some(recall) = val_recall {
            if best.as_ref().is_none_or(|(b, _, _)| recall > *b) {
                best = Some((recall, epoch, model.clone()));
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
                stopped_early = true;
                break;
            }
        }
    }

    let last_epoch = log.len();
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, last_epoch),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        stopped_early,
    })
}
