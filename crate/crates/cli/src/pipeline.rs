//! The subcommands as library functions, so the binary and the test suites
//! run the same code.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use deconfrec::dataio::{
    binarize, intervention_mix, kcore_filter, load_ratings, read_dataset, split_biased_unbiased, InteractionDataset, ParseMode,
    SplitCounts,
};
use deconfrec::eval::{emit_curves, evaluate, CurveAxis, CurvePoint, MetricReport, Metrics, RunMeta};
use deconfrec::mcdcf::{train, BatchInput, BatchNoise, Contexts, ModelParams, ModelShape, Scorer, TrainError, TrainOutcome, TrainingTriple};
use deconfrec::numkit::GradCheckReport;
use deconfrec::rng::{stream, Stream};
use deconfrec::synth::{generate, write_ground_truth, SynthGroundTruth};
use deconfrec::Error;
use serde::Serialize;

use crate::artifacts::{load_model, read_meta, save_dataset, save_model, training_log, write_text, ArtifactMeta};
use crate::config::ExperimentConfig;
use crate::method::Method;

pub const DATASET_FILE: &str = "dataset.tsv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.tsv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const METRICS_JSONL_FILE: &str = "metrics.jsonl";
pub const CURVES_FILE: &str = "curves.tsv";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl DatasetStats {
    pub fn of(ds: &InteractionDataset) -> Self {
        let SplitCounts { train, validation, test } = ds.split_counts();
        Self {
            users: ds.num_users(),
            items: ds.num_items(),
            interactions: ds.len(),
            train,
            validation,
            test,
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "users\titems\tinteractions\ttrain\tvalidation\ttest")?;
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.users, self.items, self.interactions, self.train, self.validation, self.test
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreprocessReport {
    pub loaded: usize,
    pub skipped: usize,
    pub positives: usize,
    /// Statistics after k-core filtering, before splitting.
    pub kcore: DatasetStats,
    pub split_dropped_rows: usize,
    pub stats: DatasetStats,
}

/// Load, binarize, k-core filter and split a raw ratings file.
pub fn preprocess_raw(cfg: &ExperimentConfig, raw: &Path) -> anyhow::Result<(InteractionDataset, PreprocessReport)> {
    let mode = if cfg.preprocess.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let loaded = load_ratings(raw, &cfg.data.format, mode)?;
    if loaded.skipped > 0 {
        log::warn!("skipped {} malformed rows", loaded.skipped);
    }
    let positives = binarize(&loaded.ratings, cfg.preprocess.threshold);
    let core = kcore_filter(&positives, cfg.preprocess.k_core)?;
    let kcore = DatasetStats::of(&core);
    let (ds, split) = split_biased_unbiased(&core, &cfg.split_config())?;
    Ok((
        ds.clone(),
        PreprocessReport {
            loaded: loaded.ratings.len(),
            skipped: loaded.skipped,
            positives: positives.len(),
            kcore,
            split_dropped_rows: split.dropped_rows,
            stats: DatasetStats::of(&ds),
        },
    ))
}

pub fn synthesize(cfg: &ExperimentConfig) -> anyhow::Result<(InteractionDataset, SynthGroundTruth)> {
    let synth = cfg.synth.as_ref().ok_or_else(|| Error::Config("the [synth] section is missing".into()))?;
    Ok(generate(synth)?)
}

/// The dataset named by the flag, else by the config (preprocessed file,
/// then raw ratings, then synthetic spec).
pub fn load_dataset(cfg: &ExperimentConfig, flag: Option<&Path>) -> anyhow::Result<InteractionDataset> {
    if let Some(path) = flag.or(cfg.data.dataset.as_deref()) {
        return read_dataset(path).with_context(|| format!("loading dataset {}", path.display()));
    }
    if let Some(raw) = &cfg.data.raw {
        return Ok(preprocess_raw(cfg, raw)?.0);
    }
    if cfg.synth.is_some() {
        return Ok(synthesize(cfg)?.0);
    }
    Err(Error::Config("no dataset: pass --dataset or set data.dataset, data.raw or [synth]".into()).into())
}

pub fn artifact_meta(cfg: &ExperimentConfig, kind: &str, method: Option<Method>, ds: Option<&InteractionDataset>) -> ArtifactMeta {
    ArtifactMeta {
        kind: kind.to_owned(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        method: method.map(|m| m.to_string()),
        dataset_hash: ds.map(InteractionDataset::content_hash),
    }
}

pub fn run_meta(cfg: &ExperimentConfig, method: Method, ds: &InteractionDataset) -> RunMeta {
    RunMeta {
        method: method.to_string(),
        seed: cfg.seed,
        dataset: ds.content_hash(),
        config_hash: cfg.hash(),
    }
}

pub fn train_method(cfg: &ExperimentConfig, method: Method, ds: &InteractionDataset) -> Result<TrainOutcome, TrainError> {
    train(ds, &method.train_config(&cfg.model, cfg.seed))
}

/// Ranks test users with posterior-mean representations over full train
/// histories.
pub fn evaluate_model(model: &ModelParams, ds: &InteractionDataset, ks: &[usize], meta: RunMeta) -> anyhow::Result<MetricReport> {
    let scorer = Scorer::new(model, &Contexts::full(ds))?;
    Ok(evaluate(&scorer, ds, deconfrec::dataio::Split::Test, ks, meta)?)
}

pub fn cmd_preprocess(cfg: &ExperimentConfig, input: Option<&Path>, out: &Path) -> anyhow::Result<PreprocessReport> {
    let raw = input
        .or(cfg.data.raw.as_deref())
        .ok_or_else(|| Error::Config("no raw ratings file: pass --input or set data.raw".into()))?;
    let (ds, report) = preprocess_raw(cfg, raw)?;
    save_dataset(out, &ds, &artifact_meta(cfg, "dataset", None, None))?;
    Ok(report)
}

pub fn cmd_synth(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<DatasetStats> {
    let (ds, truth) = synthesize(cfg)?;
    let meta = artifact_meta(cfg, "dataset", None, None);
    save_dataset(&out_dir.join(DATASET_FILE), &ds, &meta)?;
    let gt_path = out_dir.join(GROUND_TRUTH_FILE);
    crate::artifacts::ensure_dir(out_dir)?;
    write_ground_truth(&truth, &gt_path)?;
    crate::artifacts::write_meta(
        &gt_path,
        &ArtifactMeta {
            kind: "ground_truth".into(),
            ..meta
        },
    )?;
    Ok(DatasetStats::of(&ds))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub method: Method,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub dataset_hash: String,
}

pub fn method_dir(out_dir: &Path, method: Method) -> PathBuf {
    out_dir.join(method.as_str())
}

/// Trains the configured method and writes its checkpoint and log. On
/// divergence the last good parameters are saved before failing.
pub fn cmd_train(cfg: &ExperimentConfig, dataset: Option<&Path>, out_dir: &Path) -> anyhow::Result<TrainSummary> {
    let ds = load_dataset(cfg, dataset)?;
    let method = cfg.method;
    let dir = method_dir(out_dir, method);
    let meta = artifact_meta(cfg, "checkpoint", Some(method), Some(&ds));
    let outcome = match train_method(cfg, method, &ds) {
        Ok(o) => o,
        Err(TrainError::Diverged { epoch, source, last_good }) => {
            let path = dir.join("last_good.ckpt");
            save_model(&path, &last_good, &meta)?;
            return Err(anyhow::Error::new(source).context(format!(
                "training diverged in epoch {epoch}; last good parameters saved to {}",
                path.display()
            )));
        }
        Err(TrainError::Failed(e)) => return Err(e.into()),
    };
    let checkpoint = dir.join(CHECKPOINT_FILE);
    save_model(&checkpoint, &outcome.model, &meta)?;
    let log = dir.join(TRAIN_LOG_FILE);
    write_text(
        &log,
        &training_log(
            &ArtifactMeta {
                kind: "train_log".into(),
                ..meta.clone()
            },
            &outcome.log,
        )?,
    )?;
    Ok(TrainSummary {
        method,
        checkpoint,
        log,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.len(),
        dataset_hash: meta.dataset_hash.unwrap_or_default(),
    })
}

fn curve_ks(cfg: &ExperimentConfig, num_items: usize) -> Vec<usize> {
    let max = cfg
        .eval
        .curve_max_k
        .unwrap_or_else(|| cfg.eval.ks.iter().copied().max().unwrap_or(1));
    (1..=max.min(num_items)).collect()
}

fn write_report(dir: &Path, report: &MetricReport, curves: &[CurvePoint], meta: &ArtifactMeta) -> anyhow::Result<()> {
    write_text(&dir.join(METRICS_FILE), &report.to_table())?;
    write_text(&dir.join(METRICS_JSONL_FILE), &(serde_json::to_string(report)? + "\n"))?;
    let curve_path = dir.join(CURVES_FILE);
    write_text(&curve_path, &emit_curves(curves, &Metrics::NAMES)?)?;
    crate::artifacts::write_meta(
        &curve_path,
        &ArtifactMeta {
            kind: "curves".into(),
            ..meta.clone()
        },
    )
}

/// Evaluates a checkpoint on the test split and writes the metric table
/// plus curves over every cutoff up to the largest one.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: &Path, dataset: Option<&Path>, out_dir: &Path) -> anyhow::Result<MetricReport> {
    let ds = load_dataset(cfg, dataset)?;
    let model = load_model(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let method = match read_meta(checkpoint)?.and_then(|m| m.method) {
        Some(name) => name.parse::<Method>().map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?,
        None => cfg.method,
    };
    let meta = run_meta(cfg, method, &ds);
    let report = evaluate_model(&model, &ds, &cfg.eval.ks, meta.clone())?;
    let curve = evaluate_model(&model, &ds, &curve_ks(cfg, ds.num_items()), meta)?;
    write_report(
        &method_dir(out_dir, method),
        &report,
        &CurvePoint::over_k(&curve),
        &artifact_meta(cfg, "metrics", Some(method), Some(&ds)),
    )?;
    Ok(report)
}

/// Full model plus both single-side variants and plain MF.
pub const ABLATION_METHODS: [Method; 4] = [Method::Mcdcf, Method::McdcfU, Method::McdcfI, Method::Mf];

pub fn cmd_ablate(cfg: &ExperimentConfig, dataset: Option<&Path>, out_dir: &Path) -> anyhow::Result<Vec<MetricReport>> {
    let ds = load_dataset(cfg, dataset)?;
    let mut reports = Vec::new();
    let mut table = String::new();
    let mut curves = Vec::new();
    for method in ABLATION_METHODS {
        log::info!("ablation: training {method}");
        let outcome = train_method(cfg, method, &ds).map_err(deconfrec::Error::from)?;
        let report = evaluate_model(&outcome.model, &ds, &cfg.eval.ks, run_meta(cfg, method, &ds))?;
        let t = report.to_table();
        if table.is_empty() {
            table.push_str(&t);
        } else {
            table.extend(t.lines().skip(1).map(|l| format!("{l}\n")));
        }
        curves.extend(CurvePoint::over_k(&report));
        reports.push(report);
    }
    let dir = out_dir.join("ablation");
    write_text(&dir.join(METRICS_FILE), &table)?;
    let curve_path = dir.join(CURVES_FILE);
    write_text(&curve_path, &emit_curves(&curves, &Metrics::NAMES)?)?;
    crate::artifacts::write_meta(&curve_path, &artifact_meta(cfg, "curves", None, Some(&ds)))?;
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterventionRun {
    pub fraction: f64,
    pub moved: usize,
    pub report: MetricReport,
}

/// For every fraction, moves that share of the unbiased reserve into
/// train, retrains each method for the full epoch budget and evaluates on
/// the untouched test split.
pub fn intervention_sweep(cfg: &ExperimentConfig, ds: &InteractionDataset, fractions: &[f64], methods: &[Method]) -> anyhow::Result<Vec<InterventionRun>> {
    let mut cfg = cfg.clone();
    cfg.model.patience = 0;
    let cfg = &cfg;
    let mut runs = Vec::new();
    for &fraction in fractions {
        let (mixed, moved) = intervention_mix(ds, fraction, cfg.seed)?;
        for &method in methods {
            log::info!("intervention: fraction {fraction}, training {method}");
            let outcome = train_method(cfg, method, &mixed).map_err(deconfrec::Error::from)?;
            let report = evaluate_model(&outcome.model, &mixed, &cfg.eval.ks, run_meta(cfg, method, &mixed))?;
            runs.push(InterventionRun { fraction, moved, report });
        }
    }
    Ok(runs)
}

/// Curve points at the largest configured cutoff, one per run.
pub fn intervention_points(runs: &[InterventionRun], k: usize) -> Vec<CurvePoint> {
    runs.iter()
        .filter_map(|r| {
            r.report.get(k).map(|m| CurvePoint {
                method: r.report.meta.method.clone(),
                axis: CurveAxis::Fraction,
                x: r.fraction,
                metrics: *m,
            })
        })
        .collect()
}

pub fn cmd_intervene(cfg: &ExperimentConfig, dataset: Option<&Path>, fractions: &[f64], out_dir: &Path) -> anyhow::Result<String> {
    let ds = load_dataset(cfg, dataset)?;
    let runs = intervention_sweep(cfg, &ds, fractions, &cfg.intervention.methods)?;
    let k = cfg.eval.ks.iter().copied().max().unwrap_or(1);
    let table = emit_curves(&intervention_points(&runs, k), &["recall", "iou"])?;
    let path = out_dir.join("intervention").join(CURVES_FILE);
    write_text(&path, &table)?;
    crate::artifacts::write_meta(&path, &artifact_meta(cfg, "curves", None, Some(&ds)))?;
    Ok(table)
}

/// Gradient check of the total loss on a 5-user, 8-item fixture with
/// frozen sampling noise.
pub fn gradcheck_fixture(dim: usize, seed: u64, h: f64, tol: f64) -> anyhow::Result<GradCheckReport> {
    let user: Vec<Vec<u32>> = vec![vec![0, 1, 2], vec![2, 3], vec![4, 5, 6, 7], vec![0, 7], vec![1, 3, 5]];
    let mut item = vec![Vec::new(); 8];
    for (u, items) in user.iter().enumerate() {
        for &i in items {
            item[i as usize].push(u as u32);
        }
    }
    let ctx = Contexts { user, item };
    let triples = [(0, 1, 4), (1, 3, 0), (2, 6, 2), (4, 5, 7), (3, 0, 2)].map(|(user, pos, neg)| TrainingTriple { user, pos, neg });
    let shape = ModelShape {
        dim,
        user_confounder: true,
        item_confounder: true,
        alpha: 0.5,
        beta: 0.5,
        init_std: 0.3,
    };
    let mut model = ModelParams::init(5, 8, &shape, seed);
    let noise = BatchNoise::draw(&mut stream(seed, Stream::Noise), triples.len(), dim);
    let input = BatchInput {
        triples: &triples,
        weights: None,
        noise: &noise,
        elbo_weight: 1.0,
    };
    Ok(model.check_gradient(&ctx, &input, h, tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_gradients_pass() {
        let r = gradcheck_fixture(4, 0, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn stats_table() {
        let s = DatasetStats {
            users: 1,
            items: 2,
            interactions: 3,
            train: 2,
            validation: 1,
            test: 0,
        };
        assert_eq!(s.to_string(), "users\titems\tinteractions\ttrain\tvalidation\ttest\n1\t2\t3\t2\t1\t0");
    }
}
