//! Command-line frontend. The binary only calls [`main_with_args`].
//!
//! Exit codes: 0 success, 1 usage error, 2 data or IO error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::color::ColorPcaModel;
use crate::dataset::{
    self, materialize::MANIFEST_FILE, AugmentOps, BalanceStrategy, Manifest, MaterializeOptions, MaterializePlan, WarpSettings,
};
use crate::eval::{self, PredictionSet};
use crate::image::{load_image, save_image};
use crate::preview::contact_sheet;
use crate::rng::SeedContext;
use crate::warp::DEFAULT_MAX_FRAC;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
/// Environment variable holding the default `--workers` value.
pub const WORKERS_ENV: &str = "LESION_AUG_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "lesion-aug",
    version,
    about = "Reproducible dermoscopy augmentation and dataset preparation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the color PCA model over every pixel of the training images.
    PcaFit(PcaFitArgs),
    /// Assign stratified k-fold indices.
    Split(SplitArgs),
    /// Materialize augmented copies of the training records.
    Augment(AugmentArgs),
    /// Build balanced training subsets.
    Balance(BalanceArgs),
    /// Average committee predictions and compute the AUC report.
    Eval(EvalArgs),
    /// Tile manifest images into a preview sheet.
    ContactSheet(ContactSheetArgs),
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Worker threads for per-record work; outputs do not depend on it.
    #[arg(long, env = WORKERS_ENV, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct PcaFitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long = "model-out")]
    pub model_out: PathBuf,
    /// Use every N-th pixel of each image.
    #[arg(long = "pixel-stride", default_value_t = 1)]
    pub pixel_stride: usize,
    /// Leave this fold's images out of the fit.
    #[arg(long = "val-fold")]
    pub val_fold: Option<usize>,
    #[command(flatten)]
    pub workers: WorkerArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    /// Ridge term added to the spline kernel diagonal.
    #[arg(long = "warp-reg", default_value_t = 0.0)]
    pub warp_reg: f64,
    /// Largest relative change of each lesion semi-axis.
    #[arg(long = "max-frac", default_value_t = DEFAULT_MAX_FRAC)]
    pub max_frac: f64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated subset of crop,d4,color,warp (empty for pass-through).
    #[arg(long, default_value = "")]
    pub ops: String,
    #[arg(long = "crops-per-image", default_value_t = dataset::materialize::DEFAULT_CROPS_PER_IMAGE)]
    pub crops_per_image: usize,
    #[arg(long = "pca-model")]
    pub pca_model: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Records in this fold are copied but never augmented.
    #[arg(long = "val-fold")]
    pub val_fold: Option<usize>,
    #[command(flatten)]
    pub warp: WarpArgs,
    #[command(flatten)]
    pub workers: WorkerArgs,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// oversample | partition
    #[arg(long, default_value = "partition")]
    pub strategy: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long = "pca-model")]
    pub pca_model: Option<PathBuf>,
    /// Records in this fold are excluded from every subset.
    #[arg(long = "val-fold")]
    pub val_fold: Option<usize>,
    #[command(flatten)]
    pub warp: WarpArgs,
    #[command(flatten)]
    pub workers: WorkerArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One prediction CSV per committee member.
    #[arg(long = "pred", required = true, num_args = 1..)]
    pub preds: Vec<PathBuf>,
    #[arg(long)]
    pub truth: PathBuf,
    /// Key-value report destination.
    #[arg(long = "report-out")]
    pub report_out: PathBuf,
    /// Also write the averaged committee predictions.
    #[arg(long = "committee-out")]
    pub committee_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContactSheetArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long = "out-image")]
    pub out_image: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub rows: u32,
    #[arg(long, default_value_t = 4)]
    pub cols: u32,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| data(format!("{}: {e}", p.display()))),
        _ => Ok(()),
    }
}

fn load_model(path: Option<&Path>) -> Result<Option<ColorPcaModel>, CliError> {
    path.map(|p| ColorPcaModel::load(p).map_err(data)).transpose()
}

fn warp_settings(w: &WarpArgs) -> Result<WarpSettings, CliError> {
    if !(w.warp_reg >= 0.0 && w.warp_reg.is_finite()) {
        return Err(usage("--warp-reg must be a finite value >= 0"));
    }
    if !(0.0..1.0).contains(&w.max_frac) {
        return Err(usage("--max-frac must be in [0, 1)"));
    }
    Ok(WarpSettings {
        regularization: w.warp_reg,
        max_frac: w.max_frac,
    })
}

pub fn cmd_pca_fit(a: &PcaFitArgs) -> Result<(), CliError> {
    if a.pixel_stride == 0 {
        return Err(usage("--pixel-stride must be >= 1"));
    }
    let manifest = Manifest::load(&a.manifest).map_err(data)?;
    let model = dataset::fit_pca_from_manifest(&manifest, a.pixel_stride, a.val_fold, a.workers.workers).map_err(data)?;
    ensure_parent(&a.model_out)?;
    model.save(&a.model_out).map_err(data)?;
    info!("color model: lambda = {:?} over {} pixels", model.eigenvalues, model.pixel_count);
    Ok(())
}

pub fn cmd_split(a: &SplitArgs) -> Result<(), CliError> {
    if a.k < 2 {
        return Err(usage(format!("--k must be at least 2, got {}", a.k)));
    }
    let manifest = Manifest::load(&a.manifest).map_err(data)?;
    let plan = dataset::stratified_kfold(&manifest, a.k, &SeedContext::new(a.seed, "")).map_err(data)?;
    ensure_parent(&a.out)?;
    let out = plan.apply(&manifest).rebased_for(&a.out).map_err(data)?;
    out.save(&a.out).map_err(data)?;
    for (f, c) in plan.class_counts(&manifest).iter().enumerate() {
        info!(
            "fold {f}: {} records (melanoma {}, keratosis {}, nevus {})",
            c.iter().sum::<usize>(),
            c[0],
            c[1],
            c[2]
        );
    }
    Ok(())
}

pub fn cmd_augment(a: &AugmentArgs) -> Result<(), CliError> {
    let ops: AugmentOps = a.ops.parse().map_err(usage)?;
    if ops.color && a.pca_model.is_none() {
        return Err(usage("--ops color requires --pca-model"));
    }
    let warp = warp_settings(&a.warp)?;
    let manifest = Manifest::load(&a.manifest).map_err(data)?;
    let opts = MaterializeOptions {
        master_seed: a.seed,
        crops_per_image: a.crops_per_image,
        warp,
        pca_model: load_model(a.pca_model.as_deref())?,
        workers: a.workers.workers,
    };
    let plan = MaterializePlan::Augment {
        ops,
        validation_fold: a.val_fold,
    };
    let report = dataset::materialize(plan, &manifest, &a.out_dir, &opts).map_err(data)?;
    info!(
        "wrote {} records ({} augmented, {} skipped) to {}",
        report.records_written,
        report.augmented,
        report.skipped.len(),
        a.out_dir.join(MANIFEST_FILE).display()
    );
    Ok(())
}

pub fn cmd_balance(a: &BalanceArgs) -> Result<(), CliError> {
    let strategy: BalanceStrategy = a.strategy.parse().map_err(usage)?;
    let warp = warp_settings(&a.warp)?;
    let manifest = Manifest::load(&a.manifest).map_err(data)?;
    let train = dataset::training_records(&manifest, a.val_fold);
    let plan = dataset::balance(&train, strategy, &SeedContext::new(a.seed, "")).map_err(data)?;
    let needs_color = plan.subsets.iter().any(|s| {
        s.entries
            .iter()
            .any(|e| e.augmentations.iter().any(|x| x.kind == dataset::AugKind::Color))
    });
    if needs_color && a.pca_model.is_none() {
        return Err(usage("this balance plan schedules color copies; pass --pca-model"));
    }
    let opts = MaterializeOptions {
        master_seed: a.seed,
        crops_per_image: 0,
        warp,
        pca_model: load_model(a.pca_model.as_deref())?,
        workers: a.workers.workers,
    };
    let report = dataset::materialize(MaterializePlan::Balance(&plan), &train, &a.out_dir, &opts).map_err(data)?;
    for (k, s) in plan.subsets.iter().enumerate() {
        info!(
            "subset {k}: class counts {:?}, scheduled copies {:?}",
            s.class_counts(),
            s.augmentation_counts()
        );
    }
    info!("wrote {} records, {} skipped", report.records_written, report.skipped.len());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<eval::MetricsReport, CliError> {
    let members = a
        .preds
        .iter()
        .map(PredictionSet::load_csv)
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let committee = eval::aggregate_mean(&members).map_err(data)?;
    let truth = eval::load_truth(&a.truth).map_err(data)?;
    let report = eval::challenge_score(&committee, &truth).map_err(data)?;
    ensure_parent(&a.report_out)?;
    fs::write(&a.report_out, report.to_key_values()).map_err(|e| data(format!("{}: {e}", a.report_out.display())))?;
    if let Some(p) = &a.committee_out {
        ensure_parent(p)?;
        committee.save_csv(p).map_err(data)?;
    }
    print!("{}", report.to_table());
    Ok(report)
}

pub fn cmd_contact_sheet(a: &ContactSheetArgs) -> Result<(), CliError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(usage("--rows and --cols must be >= 1"));
    }
    let manifest = Manifest::load(&a.manifest).map_err(data)?;
    if manifest.is_empty() {
        return Err(data(format!("{} has no records", a.manifest.display())));
    }
    let cells = (a.rows * a.cols) as usize;
    if cells < manifest.len() {
        warn!("{} images but only {cells} cells; using the first {cells}", manifest.len());
    }
    let images = manifest
        .records
        .iter()
        .take(cells)
        .map(|r| load_image(manifest.resolve(&r.image)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let sheet = contact_sheet(&images, a.rows, a.cols).expect("non-empty input");
    ensure_parent(&a.out_image)?;
    save_image(&sheet, &a.out_image).map_err(data)?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    info!("resolved config: {cli:?}");
    match &cli.command {
        Command::PcaFit(a) => cmd_pca_fit(a),
        Command::Split(a) => cmd_split(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Balance(a) => cmd_balance(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::ContactSheet(a) => cmd_contact_sheet(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Data(msg)) = &e;
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}
