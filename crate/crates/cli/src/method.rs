use std::fmt;
use std::str::FromStr;

use deconfrec::baselines::{mf_config, IpsConfig, IpsVariant};
use deconfrec::mcdcf::{NegativeSampling, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, SamplerChoice};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Mcdcf,
    /// Only the user-side confounder.
    McdcfU,
    /// Only the item-side confounder.
    McdcfI,
    Mf,
    Ips,
    IpsC,
    IpsCn,
    IpsCnsr,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Mcdcf,
        Method::McdcfU,
        Method::McdcfI,
        Method::Mf,
        Method::Ips,
        Method::IpsC,
        Method::IpsCn,
        Method::IpsCnsr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcdcf => "mcdcf",
            Method::McdcfU => "mcdcf_u",
            Method::McdcfI => "mcdcf_i",
            Method::Mf => "mf",
            Method::Ips => "ips",
            Method::IpsC => "ips_c",
            Method::IpsCn => "ips_cn",
            Method::IpsCnsr => "ips_cnsr",
        }
    }

    pub fn uses_confounders(self) -> bool {
        matches!(self, Method::Mcdcf | Method::McdcfU | Method::McdcfI)
    }

    fn ips_variant(self) -> Option<IpsVariant> {
        match self {
            Method::Ips => Some(IpsVariant::Plain),
            Method::IpsC => Some(IpsVariant::Clip),
            Method::IpsCn => Some(IpsVariant::ClipNorm),
            Method::IpsCnsr => Some(IpsVariant::ClipNormSmooth),
            _ => None,
        }
    }

    /// Trainer settings for this method. The ablations drop one side's
    /// encoder and zero its fusion weight.
    pub fn train_config(self, model: &ModelConfig, seed: u64) -> TrainConfig {
        let pnsm = NegativeSampling::Pnsm { margin: model.margin };
        let negatives = match model.sampler {
            SamplerChoice::Uniform => NegativeSampling::Uniform,
            SamplerChoice::Pnsm => pnsm,
            SamplerChoice::Auto if self.uses_confounders() => pnsm,
            SamplerChoice::Auto => NegativeSampling::Uniform,
        };
        let base = TrainConfig {
            dim: model.dim,
            alpha: model.alpha,
            beta: model.beta,
            elbo_weight: model.elbo_weight,
            user_confounder: true,
            item_confounder: true,
            context_cap: model.context_cap,
            lr: model.lr,
            batch_size: model.batch_size,
            epochs: model.epochs,
            patience: (model.patience > 0).then_some(model.patience),
            eval_k: model.eval_k,
            negatives,
            ips: None,
            init_std: model.init_std,
            seed,
        };
        match self {
            Method::Mcdcf => base,
            Method::McdcfU => TrainConfig {
                item_confounder: false,
                beta: 0.0,
                ..base
            },
            Method::McdcfI => TrainConfig {
                user_confounder: false,
                alpha: 0.0,
                ..base
            },
            Method::Mf => mf_config(&base),
            ips => TrainConfig {
                ips: ips.ips_variant().map(|variant| IpsConfig {
                    variant,
                    clip_max: model.ips_clip_max,
                }),
                ..mf_config(&base)
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown method {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("dice".parse::<Method>().is_err());
    }

    #[test]
    fn ablations_disable_one_side() {
        let model = ModelConfig::default();
        let u = Method::McdcfU.train_config(&model, 1);
        assert!(u.user_confounder && !u.item_confounder);
        assert_eq!((u.alpha, u.beta), (0.5, 0.0));
        let i = Method::McdcfI.train_config(&model, 1);
        assert!(!i.user_confounder && i.item_confounder);
        assert_eq!((i.alpha, i.beta), (0.0, 0.5));
    }

    #[test]
    fn baselines_have_no_confounders() {
        let model = ModelConfig::default();
        for m in [Method::Mf, Method::Ips, Method::IpsC, Method::IpsCn, Method::IpsCnsr] {
            let cfg = m.train_config(&model, 0);
            assert!(!cfg.user_confounder && !cfg.item_confounder);
            assert_eq!(cfg.elbo_weight, 0.0);
            assert_eq!(cfg.negatives, NegativeSampling::Uniform);
            assert_eq!(cfg.ips.is_some(), m != Method::Mf);
        }
        assert_eq!(
            Method::Mcdcf.train_config(&model, 0).negatives,
            NegativeSampling::Pnsm { margin: 10.0 }
        );
    }
}
