use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use deconfrec_cli::config::{ExperimentConfig, OUTPUT_ENV};
use deconfrec_cli::method::Method;
use deconfrec_cli::{exit_code, pipeline, NumericalFailure};

#[derive(Debug, Parser)]
#[command(name = "deconfrec", version, about = "Debiased implicit-feedback recommendation with learned confounders")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root directory for outputs.
    #[arg(long, global = true, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,

    /// Repeat for more logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Args)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    method: Option<Method>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// 0 disables early stopping.
    #[arg(long, global = true)]
    patience: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    context_cap: Option<usize>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    #[arg(long, global = true)]
    elbo_weight: Option<f64>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    k_core: Option<usize>,
    /// Comma-separated metric cutoffs.
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            seed => cfg.seed,
            method => cfg.method,
            dim => cfg.model.dim,
            alpha => cfg.model.alpha,
            beta => cfg.model.beta,
            lr => cfg.model.lr,
            epochs => cfg.model.epochs,
            patience => cfg.model.patience,
            batch_size => cfg.model.batch_size,
            context_cap => cfg.model.context_cap,
            margin => cfg.model.margin,
            elbo_weight => cfg.model.elbo_weight,
            threshold => cfg.preprocess.threshold,
            k_core => cfg.preprocess.k_core,
            ks => cfg.eval.ks,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Binarize, k-core filter and split a raw ratings file.
    Preprocess {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to `<output-dir>/dataset.tsv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset and its ground truth.
    Synth,
    /// Train the configured method.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train and evaluate MCDCF, MCDCF-U, MCDCF-I and MF.
    Ablate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Retrain with growing shares of unbiased data in train.
    Intervene {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Finite-difference check of the analytic gradients on a toy fixture.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    let out = cfg.output_root(cli.output_dir.as_deref());
    match cli.command {
        Command::Preprocess { input, out: target } => {
            let target = target.unwrap_or_else(|| out.join(pipeline::DATASET_FILE));
            let report = pipeline::cmd_preprocess(&cfg, input.as_deref(), &target)?;
            log::info!("k-core: {} users, {} items, {} interactions", report.kcore.users, report.kcore.items, report.kcore.interactions);
            println!("{}", report.stats);
            println!("wrote {}", target.display());
        }
        Command::Synth => {
            let stats = pipeline::cmd_synth(&cfg, &out)?;
            println!("{stats}");
            println!("wrote {}", out.display());
        }
        Command::Train { dataset } => {
            let s = pipeline::cmd_train(&cfg, dataset.as_deref(), &out)?;
            println!(
                "{}: {} epochs, best epoch {}, checkpoint {}",
                s.method,
                s.epochs_run,
                s.best_epoch,
                s.checkpoint.display()
            );
        }
        Command::Evaluate { checkpoint, dataset } => {
            let report = pipeline::cmd_evaluate(&cfg, &checkpoint, dataset.as_deref(), &out)?;
            print!("{}", report.to_table());
        }
        Command::Ablate { dataset } => {
            for report in pipeline::cmd_ablate(&cfg, dataset.as_deref(), &out)? {
                print!("{}", report.to_table());
            }
        }
        Command::Intervene { dataset, fractions } => {
            let fractions = fractions.unwrap_or_else(|| cfg.intervention.fractions.clone());
            print!("{}", pipeline::cmd_intervene(&cfg, dataset.as_deref(), &fractions, &out)?);
        }
        Command::Gradcheck { dim, step, tol } => {
            let report = pipeline::gradcheck_fixture(dim, cfg.seed, step, tol)?;
            println!("{}", serde_json::to_string(&report).context("serializing report")?);
            if !report.passed {
                anyhow::bail!(NumericalFailure(format!(
                    "gradient check failed: max relative error {:.3e} exceeds {tol:e}",
                    report.max_rel_error
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
