//! Experiment configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use deconfrec::dataio::{ColumnSpec, SplitConfig};
use deconfrec::synth::SynthConfig;
use deconfrec::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::method::Method;

/// Environment variable naming the output root.
pub const OUTPUT_ENV: &str = "DECONFREC_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub method: Method,
    /// Output root; a command-line flag or `DECONFREC_OUT` takes precedence.
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub synth: Option<SynthConfig>,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub intervention: InterventionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            method: Method::Mcdcf,
            output_dir: None,
            data: DataConfig::default(),
            synth: None,
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            eval: EvalConfig::default(),
            intervention: InterventionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Raw delimited ratings.
    pub raw: Option<PathBuf>,
    /// A preprocessed dataset file.
    pub dataset: Option<PathBuf>,
    pub format: ColumnSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub threshold: f64,
    pub k_core: usize,
    /// Defaults to the experiment seed.
    pub split_seed: Option<u64>,
    pub unbiased_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub lenient: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            threshold: 5.0,
            k_core: 10,
            split_seed: None,
            unbiased_fraction: 0.30,
            validation_fraction: 0.10,
            test_fraction: 0.20,
            lenient: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    /// PNSM for the confounder models, uniform for the baselines.
    #[default]
    Auto,
    Uniform,
    Pnsm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub elbo_weight: f64,
    pub context_cap: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub eval_k: usize,
    pub margin: f64,
    pub sampler: SamplerChoice,
    pub init_std: f64,
    pub ips_clip_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            alpha: 0.5,
            beta: 0.5,
            elbo_weight: 1.0,
            context_cap: 64,
            lr: 0.01,
            batch_size: 128,
            epochs: 100,
            patience: 10,
            eval_k: 20,
            margin: 10.0,
            sampler: SamplerChoice::Auto,
            init_std: 0.1,
            ips_clip_max: 1000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Largest cutoff of the IOU curve; defaults to the largest of `ks`.
    pub curve_max_k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![20, 50],
            curve_max_k: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionConfig {
    pub fractions: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            methods: vec![Method::Mf, Method::Mcdcf],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            unbiased_fraction: self.preprocess.unbiased_fraction,
            validation_fraction: self.preprocess.validation_fraction,
            test_fraction: self.preprocess.test_fraction,
            rng_seed: self.preprocess.split_seed.unwrap_or(self.seed),
        }
    }

    /// Hex SHA-256 of the effective configuration, output location excluded.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("configuration serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Flag, then environment, then config file, then `./deconfrec-out`.
    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("deconfrec-out"))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks must list positive cutoffs".into()).into());
        }
        if self.preprocess.k_core == 0 {
            return Err(Error::Config("preprocess.k_core must be at least 1".into()).into());
        }
        if self.intervention.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config("intervention fractions must be finite and nonnegative".into()).into());
        }
        self.split_config().validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }
}
