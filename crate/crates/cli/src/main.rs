use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ganlip::evaluate::{cmd_evaluate, EvaluateOptions, GeneratorSource};
use ganlip::preprocess::{cmd_preprocess, PreprocessOptions};
use ganlip::report::cmd_report;
use ganlip::train::{cmd_train, DataSource, RunConfig, TrainOptions};
use ganlip::CliError;
use ganlip_core::gan::{GpInputMode, ModelKind};
use ganlip_core::melspec::MelConfig;

#[derive(Parser)]
#[command(
    name = "ganlip",
    version,
    about = "Lip-sync GAN experiments: preprocess, train, evaluate, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crop frames, cut mel windows and draw frame shifts into a store.
    Preprocess(PreprocessArgs),
    /// Train LipGAN or L1WGAN-GP on a store or the toy corpus.
    Train(TrainArgs),
    /// Score a generator on held-out pairs.
    Evaluate(EvaluateArgs),
    /// Compare run reports side by side.
    Report(ReportArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    seed: u64,
    #[arg(long, default_value_t = 96)]
    image_size: usize,
    #[arg(long)]
    n_mels: Option<usize>,
    #[arg(long)]
    window_cols: Option<usize>,
    #[arg(long)]
    sample_rate: Option<u32>,
}

/// Config file, root seed and data source shared by `train` and `evaluate`.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the synthetic toy corpus instead of a store.
    #[arg(long, conflicts_with = "data")]
    toy: bool,
    /// Preprocessed store directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Toy image size.
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<(RunConfig, DataSource), CliError> {
        let mut cfg = RunConfig::load_or_default(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(n) = self.image_size {
            cfg.toy.image_size = n;
        }
        if let Some(h) = self.hidden {
            cfg.train.hidden = h;
        }
        let data = match (&self.data, self.toy) {
            (Some(dir), _) => DataSource::Store(dir.clone()),
            (None, true) => DataSource::Toy,
            (None, false) => return Err(CliError::usage("pass --data DIR or --toy")),
        };
        Ok((cfg, data))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// lipgan or l1wgan-gp
    #[arg(long)]
    model: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    n_critic: Option<usize>,
    #[arg(long)]
    lambda_gp: Option<f64>,
    /// interp or gen
    #[arg(long)]
    gp_mode: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    loss_log_every: Option<usize>,
    #[arg(long)]
    sample_every: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, required_unless_present_any = ["untrained", "identity"])]
    checkpoint: Option<PathBuf>,
    /// Evaluate a freshly initialized generator.
    #[arg(long, conflicts_with_all = ["checkpoint", "identity"])]
    untrained: bool,
    /// Evaluate the ground truth against itself.
    #[arg(long, conflicts_with = "checkpoint")]
    identity: bool,
    /// EMB1 embeddings of the real frames (needs --generated-embeddings).
    #[arg(long, requires = "generated_embeddings")]
    real_embeddings: Option<PathBuf>,
    #[arg(long, requires = "real_embeddings")]
    generated_embeddings: Option<PathBuf>,
    /// Model name in the report.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(CliError::usage)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess(a) => {
            let d = MelConfig::default();
            let mel = MelConfig {
                n_mels: a.n_mels.unwrap_or(d.n_mels),
                window_cols: a.window_cols.unwrap_or(d.window_cols),
                sample_rate: a.sample_rate.unwrap_or(d.sample_rate),
                ..d
            };
            let s = cmd_preprocess(&PreprocessOptions {
                manifest: a.manifest,
                out: a.out,
                seed: a.seed,
                image_size: a.image_size,
                mel,
            })?;
            println!(
                "preprocessed {} videos, {} frames, {} pairs, mel {}x{}",
                s.videos, s.frames, s.pairs, s.mel_shape[0], s.mel_shape[1]
            );
        }
        Command::Train(a) => {
            let model: ModelKind = parse(&a.model)?;
            let (mut config, data) = a.run.resolve()?;
            let t = &mut config.train;
            if let Some(v) = a.epochs {
                t.epochs = v;
            }
            if let Some(v) = a.batch_size {
                t.batch_size = v;
            }
            if let Some(v) = a.n_critic {
                t.n_critic = v;
            }
            if let Some(v) = a.lambda_gp {
                t.lambda_gp = v;
            }
            if let Some(v) = &a.gp_mode {
                t.gp_input_mode = parse::<GpInputMode>(v)?;
            }
            if let Some(v) = a.learning_rate {
                t.learning_rate = v;
            }
            if a.max_iters.is_some() {
                t.max_iters = a.max_iters;
            }
            if let Some(v) = a.loss_log_every {
                t.loss_log_every = v;
            }
            if let Some(v) = a.sample_every {
                t.sample_every = v;
            }
            let out = cmd_train(&TrainOptions {
                model,
                config,
                data,
                out: a.out.clone(),
            })?;
            println!(
                "trained {model}: {} generator / {} critic updates, {} log rows -> {}",
                out.diagnostics.generator_updates,
                out.diagnostics.discriminator_updates,
                out.log.records().len(),
                a.out.display()
            );
        }
        Command::Evaluate(a) => {
            let (config, data) = a.run.resolve()?;
            let generator = match (a.checkpoint, a.untrained, a.identity) {
                (Some(p), _, _) => GeneratorSource::Checkpoint(p),
                (None, true, _) => GeneratorSource::Untrained,
                _ => GeneratorSource::Identity,
            };
            let out = cmd_evaluate(&EvaluateOptions {
                generator,
                config,
                data,
                out: a.out.clone(),
                embeddings: a.real_embeddings.zip(a.generated_embeddings),
                label: a.label,
            })?;
            let r = &out.report;
            let mean = |k: &str| {
                r.metrics
                    .get(k)
                    .map_or("-".to_string(), |s| format!("{:.4}", s.mean))
            };
            println!(
                "{}: {} frames, SSIM mean {}, PSNR mean {} ({} infinite), FID {} -> {}",
                r.model,
                out.frames.len(),
                mean("ssim"),
                mean("psnr"),
                r.n_infinite.get("psnr").copied().unwrap_or(0),
                r.fid.map_or("-".to_string(), |f| format!("{f:.4}")),
                a.out.display()
            );
        }
        Command::Report(a) => {
            let out = cmd_report(&a.reports, &a.out)?;
            print!("{}", out.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
