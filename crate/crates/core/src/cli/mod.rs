//! Command-line front end: run configuration, checkpoints, sample tables,
//! density images and the `ivegan` subcommands.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 file-system
//! failure, 4 non-finite values during training.

pub mod checkpoint;
pub mod config;
pub mod csv;
pub mod pgm;

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tensor};
use crate::data::LabeledImages;
use crate::eval::{coverage, density_grid, latent_knn_agreement, reconstruction_error, CoverageReport, JSD_RANGE};
use crate::model::{init_rng, train_rng, GanModel, IveGanModel, ModelError, StepReport, TrainConfig, Trainer, VanillaGan};
use crate::nn::NnError;

pub use checkpoint::Checkpoint;
pub use config::{Experiment, ModelKind, RunConfig};

/// Name of the environment variable holding the log filter.
pub const LOG_ENV: &str = "IVEGAN_LOG";

const EVAL_STREAM: u64 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

fn is_numeric(e: &ModelError) -> bool {
    let autodiff = |a: &AutodiffError| matches!(a, AutodiffError::NonFinite { .. } | AutodiffError::NonFiniteResult { .. });
    match e {
        ModelError::NonFinite { .. } => true,
        ModelError::Autodiff(a) | ModelError::Nn(NnError::Autodiff(a)) => autodiff(a),
        ModelError::Nn(n) => matches!(n, NnError::NonFiniteGrad { .. } | NnError::NonFiniteParam { .. }),
        _ => false,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        if is_numeric(&e) {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Either kind of trained model, as stored in a checkpoint.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Ive(IveGanModel),
    Vanilla(VanillaGan),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Ive(_) => ModelKind::IveGan,
            AnyModel::Vanilla(_) => ModelKind::Vanilla,
        }
    }

    pub fn arch(&self) -> &crate::model::Architecture {
        match self {
            AnyModel::Ive(m) => &m.arch,
            AnyModel::Vanilla(m) => &m.arch,
        }
    }

    /// The invariant-encoding model, or an error for the baseline, which has
    /// no encoder.
    pub fn ive(&self) -> Result<&IveGanModel, CliError> {
        match self {
            AnyModel::Ive(m) => Ok(m),
            AnyModel::Vanilla(_) => Err(CliError::Config("the vanilla baseline has no encoder".into())),
        }
    }
}

impl GanModel for AnyModel {
    fn train_step(&mut self, x: &Tensor, iteration: u64, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<StepReport, ModelError> {
        match self {
            AnyModel::Ive(m) => m.train_step(x, iteration, cfg, rng),
            AnyModel::Vanilla(m) => m.train_step(x, iteration, cfg, rng),
        }
    }

    fn sample_novel(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, ModelError> {
        match self {
            AnyModel::Ive(m) => m.sample_novel(n, rng),
            AnyModel::Vanilla(m) => m.sample_novel(n, rng),
        }
    }

    fn data_dim(&self) -> usize {
        self.arch().data_dim
    }
}

#[derive(Debug, Parser)]
#[command(name = "ivegan", version, about = "Invariant-encoding GAN training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train from a run configuration, optionally resuming from a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Draw novel samples G(z′, z) with z from the prior.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode the rows of a sample table.
    Encode {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the rows of a sample table as G(z′, E(x)).
    Reconstruct {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coverage report (ring) or representation report (MNIST-lite).
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a two-column sample table as a log-scaled P5 density image.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::eval::JSD_BINS)]
        bins: usize,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code, printing errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { config, resume } => cmd_train(&config, resume.as_deref()).map(|_| ()),
        Command::Sample { ckpt, n, seed, out } => cmd_sample(&ckpt, n, seed, &out),
        Command::Encode { ckpt, input, out } => cmd_encode(&ckpt, &input, &out),
        Command::Reconstruct { ckpt, input, seed, out } => cmd_reconstruct(&ckpt, &input, seed, &out),
        Command::Eval { ckpt, config, out } => cmd_eval(&ckpt, &config, &out).map(|r| println!("{r}")),
        Command::Plot { input, out, bins } => cmd_plot(&input, &out, bins),
    }
}

/// Final or on-demand evaluation of a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum EvalReport {
    Ring {
        model: ModelKind,
        iteration: u64,
        coverage: CoverageReport,
    },
    MnistLite {
        iteration: u64,
        n_images: usize,
        reconstruction_l2: f64,
        shuffled_l2: f64,
        /// `1 − reconstruction_l2 / shuffled_l2`
        reduction: f64,
        knn_k: usize,
        knn_agreement: f64,
    },
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalReport::Ring { model, iteration, coverage: c } => {
                let shares: Vec<String> = c.per_mode_share().iter().map(|s| format!("{:.3}", s)).collect();
                write!(
                    f,
                    "{model:?} @ {iteration}: {}/{} modes covered, assigned {:.3}, JSD {:.4}, shares [{}]",
                    c.covered_modes,
                    c.per_mode_counts.len(),
                    c.assigned_fraction,
                    c.jsd,
                    shares.join(" ")
                )
            }
            EvalReport::MnistLite {
                iteration,
                n_images,
                reconstruction_l2,
                shuffled_l2,
                reduction,
                knn_k,
                knn_agreement,
            } => write!(
                f,
                "@ {iteration} on {n_images} images: reconstruction L2 {reconstruction_l2:.4} vs shuffled {shuffled_l2:.4} \
                 ({:.1}% lower), latent {knn_k}-NN label agreement {knn_agreement:.3}",
                100.0 * reduction
            ),
        }
    }
}

fn eval_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    rng
}

/// Evaluates `model` under the settings of `cfg`.
pub fn evaluate(cfg: &RunConfig, model: &AnyModel, images: Option<&LabeledImages>, iteration: u64) -> Result<EvalReport, CliError> {
    let mut rng = eval_rng(cfg.seed);
    match cfg.experiment {
        Experiment::Ring => {
            let samples = model.sample_novel(cfg.eval.n_samples, &mut rng)?;
            let cov = coverage(&samples, &cfg.ring_spec(), cfg.eval.capture_k, cfg.eval.min_share).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(EvalReport::Ring {
                model: model.kind(),
                iteration,
                coverage: cov,
            })
        }
        Experiment::MnistLite => {
            let m = model.ive()?;
            let imgs = images.ok_or_else(|| CliError::Config("mnist_lite evaluation needs the dataset".into()))?;
            let latents = m.encode(&imgs.images)?;
            let recon = m.reconstruct(&imgs.images, &mut rng)?;
            let rec = reconstruction_error(&imgs.images, &recon, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
            let knn = latent_knn_agreement(&latents, &imgs.labels, cfg.eval.knn_k).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(EvalReport::MnistLite {
                iteration,
                n_images: imgs.len(),
                reconstruction_l2: rec.mean,
                shuffled_l2: rec.mismatched_mean,
                reduction: 1.0 - rec.mean / rec.mismatched_mean,
                knn_k: cfg.eval.knn_k,
                knn_agreement: knn,
            })
        }
    }
}

const HISTORY_HEADER: &str = "iteration,loss_d,loss_dprime,loss_ge,logit_real_pair,logit_fake_pair,logit_real,logit_novel";

fn history_row(r: &StepReport) -> String {
    let opt = |v: Option<f64>| v.map(csv::format_value).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{}\n",
        r.iteration,
        opt(r.loss_d),
        csv::format_value(r.loss_dprime),
        csv::format_value(r.loss_ge),
        opt(r.logit_real_pair),
        opt(r.logit_fake_pair),
        csv::format_value(r.logit_real),
        csv::format_value(r.logit_novel)
    )
}

/// The history file truncated to the steps up to and including `upto`.
fn history_prefix(path: &Path, upto: u64) -> Result<String, CliError> {
    let mut out = format!("{HISTORY_HEADER}\n");
    if upto == 0 || !path.exists() {
        return Ok(out);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    for line in text.lines().skip(1) {
        let it: u64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Config(format!("{}: malformed history row `{line}`", path.display())))?;
        if it <= upto {
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Output files of a training run.
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn history(&self) -> PathBuf {
        self.root.join("history.csv")
    }
    pub fn snapshot(&self, iteration: u64) -> PathBuf {
        self.root.join("snapshots").join(format!("iter_{iteration:06}.csv"))
    }
    pub fn checkpoint_at(&self, iteration: u64) -> PathBuf {
        self.root.join("checkpoints").join(format!("iter_{iteration:06}.json"))
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
}

/// Trains per `config_path`. Everything is validated, and a resume
/// checkpoint checked against the config, before any file is written.
pub fn cmd_train(config_path: &Path, resume: Option<&Path>) -> Result<EvalReport, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let images = cfg.load_images()?;
    let data = cfg.data_source(images.as_ref());
    let hash = cfg.trajectory_hash();
    let (model, rng, start) = match resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let mismatch = |what: &str| CliError::Config(format!("{}: checkpoint {what} does not match {}", p.display(), config_path.display()));
            if ck.config_hash != hash {
                return Err(mismatch("configuration hash"));
            }
            if ck.experiment != cfg.experiment || ck.model != cfg.model || ck.arch != cfg.architecture() {
                return Err(mismatch("model"));
            }
            if ck.iteration > cfg.train.iterations {
                return Err(mismatch("iteration"));
            }
            (ck.restore()?, ck.rng, ck.iteration)
        }
        None => {
            let arch = cfg.architecture();
            let mut init = init_rng(cfg.seed);
            let model = match cfg.model {
                ModelKind::IveGan => AnyModel::Ive(IveGanModel::new(arch, &cfg.train.optim, &mut init)?),
                ModelKind::Vanilla => AnyModel::Vanilla(VanillaGan::new(arch, &cfg.train.optim, &mut init)?),
            };
            (model, train_rng(cfg.seed), 0)
        }
    };
    let mut trainer = Trainer::resume(model, cfg.train_config(), data, rng, start)?;

    let paths = RunPaths { root: cfg.output_dir.clone() };
    for dir in [paths.root.clone(), paths.root.join("snapshots"), paths.root.join("checkpoints")] {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let mut resolved = serde_json::to_string_pretty(&cfg).expect("config serializes");
    resolved.push('\n');
    write_file(&paths.config(), resolved.as_bytes())?;
    let history_path = paths.history();
    let prefix = history_prefix(&history_path, start)?;
    write_file(&history_path, prefix.as_bytes())?;
    let mut history = BufWriter::new(
        File::options()
            .append(true)
            .open(&history_path)
            .map_err(io_err(&history_path))?,
    );

    let save_snapshot = |trainer: &Trainer<AnyModel>| -> Result<(), CliError> {
        let snap = trainer.snapshot()?;
        if cfg.experiment == Experiment::Ring {
            if let Ok(c) = coverage(&snap.samples, &cfg.ring_spec(), cfg.eval.capture_k, cfg.eval.min_share) {
                log::info!(
                    "iteration {}: {} modes covered, assigned {:.3}, JSD {:.4}",
                    snap.iteration,
                    c.covered_modes,
                    c.assigned_fraction,
                    c.jsd
                );
            }
        }
        csv::write(&paths.snapshot(snap.iteration), &snap.samples)
    };
    let save_checkpoint = |trainer: &Trainer<AnyModel>, path: &Path| -> Result<(), CliError> {
        Checkpoint::capture(&trainer.model, cfg.experiment, trainer.iteration(), hash.clone(), trainer.rng()).save(path)
    };

    if trainer.iteration() == 0 {
        save_snapshot(&trainer)?;
    }
    let log_every = (cfg.train.iterations / 100).max(1);
    while !trainer.is_done() {
        let report = trainer.step()?;
        let it = report.iteration;
        history.write_all(history_row(&report).as_bytes()).map_err(io_err(&history_path))?;
        if it % log_every == 0 {
            log::debug!(
                "iteration {it}: loss_D {:?} loss_D′ {:.4} loss_GE {:.4}",
                report.loss_d,
                report.loss_dprime,
                report.loss_ge
            );
        }
        if it % cfg.train.snapshot_every == 0 {
            save_snapshot(&trainer)?;
        }
        if it % cfg.checkpoint_every() == 0 {
            history.flush().map_err(io_err(&history_path))?;
            save_checkpoint(&trainer, &paths.checkpoint_at(it))?;
        }
    }
    history.flush().map_err(io_err(&history_path))?;
    save_checkpoint(&trainer, &paths.checkpoint())?;

    let report = evaluate(&cfg, &trainer.model, images.as_ref(), trainer.iteration())?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(&paths.report(), text.as_bytes())?;
    log::info!("{report}");
    Ok(report)
}

fn load_model(ckpt: &Path) -> Result<(Checkpoint, AnyModel), CliError> {
    let ck = Checkpoint::load(ckpt)?;
    let model = ck.restore()?;
    Ok((ck, model))
}

fn read_rows(path: &Path, width: usize) -> Result<Tensor, CliError> {
    let x = csv::read(path)?;
    if x.rows() == 0 {
        return Ok(Tensor::zeros(&[0, width]));
    }
    if x.cols() != width {
        return Err(CliError::Config(format!(
            "{}: rows have {} values but the checkpoint expects {width}",
            path.display(),
            x.cols()
        )));
    }
    Ok(x)
}

pub fn cmd_sample(ckpt: &Path, n: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let (_, model) = load_model(ckpt)?;
    let samples = model.sample_novel(n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    csv::write(out, &samples)
}

pub fn cmd_encode(ckpt: &Path, input: &Path, out: &Path) -> Result<(), CliError> {
    let (_, model) = load_model(ckpt)?;
    let m = model.ive()?;
    let x = read_rows(input, m.data_dim())?;
    let z = if x.rows() == 0 {
        Tensor::zeros(&[0, m.z_dim()])
    } else {
        m.encode(&x)?
    };
    csv::write(out, &z)
}

pub fn cmd_reconstruct(ckpt: &Path, input: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let (_, model) = load_model(ckpt)?;
    let m = model.ive()?;
    let x = read_rows(input, m.data_dim())?;
    let r = if x.rows() == 0 {
        x
    } else {
        m.reconstruct(&x, &mut ChaCha8Rng::seed_from_u64(seed))?
    };
    csv::write(out, &r)
}

pub fn cmd_eval(ckpt: &Path, config: &Path, out: &Path) -> Result<EvalReport, CliError> {
    let cfg = RunConfig::load(config)?;
    let (ck, model) = load_model(ckpt)?;
    if ck.experiment != cfg.experiment {
        return Err(CliError::Config(format!(
            "{} holds a {:?} model but {} describes a {:?} experiment",
            ckpt.display(),
            ck.experiment,
            config.display(),
            cfg.experiment
        )));
    }
    if ck.arch.data_dim != cfg.data_dim() {
        return Err(CliError::Config(format!("{}: data width does not match {}", ckpt.display(), config.display())));
    }
    let images = cfg.load_images()?;
    let report = evaluate(&cfg, &model, images.as_ref(), ck.iteration)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(out, text.as_bytes())?;
    Ok(report)
}

pub fn cmd_plot(input: &Path, out: &Path, bins: usize) -> Result<(), CliError> {
    if bins < 2 {
        return Err(CliError::Config(format!("--bins must be at least 2, got {bins}")));
    }
    let samples = csv::read(input)?;
    if samples.rows() > 0 && samples.cols() != 2 {
        return Err(CliError::Config(format!("{}: plotting needs two columns, found {}", input.display(), samples.cols())));
    }
    let grid = density_grid(&samples, bins, JSD_RANGE).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(out, &pgm::encode(&grid))
}
