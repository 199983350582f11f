//! Writes augmented and balanced datasets to disk.
//!
//! Work is split per source record and run on a fixed-size thread pool;
//! results are collected in input order and every random draw is keyed by the
//! output record id, so the files written do not depend on the worker count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{self, AugError, Sample, WarpSettings};
use super::balance::{AugKind, BalancePlan, PlanEntry};
use super::manifest::{Manifest, SampleRecord};
use super::provenance::{AugStep, Provenance};
use super::DatasetError;
use crate::color::{ColorPcaModel, CovarianceAccumulator};
use crate::geometric::enumerate_d4;
use crate::image::{load_image, load_mask, save_image, save_mask};
use crate::rng::SeedContext;

pub const IMAGES_DIR: &str = "images";
pub const MASKS_DIR: &str = "masks";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const REPORT_FILE: &str = "report.txt";
pub const PLAN_FILE: &str = "plan.json";
pub const DEFAULT_CROPS_PER_IMAGE: usize = 3;

/// Which augmentations `augment` runs on each training record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AugmentOps {
    pub crop: bool,
    pub d4: bool,
    pub color: bool,
    pub warp: bool,
}

impl AugmentOps {
    pub fn all() -> Self {
        Self {
            crop: true,
            d4: true,
            color: true,
            warp: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.crop || self.d4 || self.color || self.warp)
    }
}

impl FromStr for AugmentOps {
    type Err = String;

    /// Comma-separated subset of `crop,d4,color,warp` (empty string = none).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut ops = AugmentOps::default();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "crop" => ops.crop = true,
                "d4" => ops.d4 = true,
                "color" => ops.color = true,
                "warp" => ops.warp = true,
                "all" => ops = AugmentOps::all(),
                other => return Err(format!("unknown op {other:?} (crop, d4, color, warp)")),
            }
        }
        Ok(ops)
    }
}

impl fmt::Display for AugmentOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.crop, "crop"), (self.d4, "d4"), (self.color, "color"), (self.warp, "warp")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct MaterializeOptions {
    pub master_seed: u64,
    pub crops_per_image: usize,
    pub warp: WarpSettings,
    pub pca_model: Option<ColorPcaModel>,
    pub workers: usize,
}

impl MaterializeOptions {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            crops_per_image: DEFAULT_CROPS_PER_IMAGE,
            warp: WarpSettings::default(),
            pca_model: None,
            workers: 1,
        }
    }
}

/// What to materialize.
#[derive(Debug, Clone, Copy)]
pub enum MaterializePlan<'a> {
    /// Augment every record outside `validation_fold` with `ops`; validation
    /// records are copied unchanged.
    Augment { ops: AugmentOps, validation_fold: Option<usize> },
    /// One output directory per balanced subset.
    Balance(&'a BalancePlan),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub op: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterializeReport {
    pub records_written: usize,
    pub augmented: usize,
    pub skipped: Vec<Skip>,
    /// One manifest per output directory (a single one for `Augment`).
    pub manifests: Vec<Manifest>,
}

impl MaterializeReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "records_written={}\naugmented={}\nskipped={}\n",
            self.records_written,
            self.augmented,
            self.skipped.len()
        );
        for k in &self.skipped {
            s.push_str(&format!("skip id={} op={} reason={}\n", k.id, k.op, k.reason));
        }
        s
    }
}

#[derive(Default)]
struct JobOutput {
    records: Vec<SampleRecord>,
    skipped: Vec<Skip>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, DatasetError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DatasetError::Pool(e.to_string()))
}

fn create_dir(path: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(path).map_err(|e| DatasetError::io(path, e))
}

fn load_sample(manifest: &Manifest, rec: &SampleRecord) -> Result<Sample, DatasetError> {
    let image = load_image(manifest.resolve(&rec.image))?;
    let mask = match &rec.mask {
        Some(m) => {
            let mask = load_mask(manifest.resolve(m))?;
            image.check_pair(&mask)?;
            Some(mask)
        }
        None => None,
    };
    Ok(Sample::new(image, mask))
}

/// Writes `sample` under `out_dir` as `images/<id>.png` (+ mask) and returns
/// the record pointing at the new relative paths.
fn write_sample(
    out_dir: &Path,
    template: &SampleRecord,
    id: &str,
    sample: &Sample,
    provenance: Provenance,
) -> Result<SampleRecord, DatasetError> {
    let image_rel = format!("{IMAGES_DIR}/{id}.png");
    save_image(&sample.image, out_dir.join(&image_rel))?;
    let mask_rel = match &sample.mask {
        Some(m) => {
            let rel = format!("{MASKS_DIR}/{id}.png");
            save_mask(m, out_dir.join(&rel))?;
            Some(rel)
        }
        None => None,
    };
    Ok(SampleRecord {
        id: id.to_string(),
        image: image_rel,
        mask: mask_rel,
        label: template.label,
        fold: template.fold,
        provenance,
    })
}

fn augmented(source: &str, master_seed: u64, steps: Vec<AugStep>) -> Provenance {
    Provenance::Augmented {
        source: source.to_string(),
        master_seed,
        steps,
    }
}

fn skip(id: &str, op: &str, err: impl fmt::Display) -> Skip {
    warn!("skipping {op} for {id}: {err}");
    Skip {
        id: id.to_string(),
        op: op.to_string(),
        reason: err.to_string(),
    }
}

type StepResult = Result<(Sample, Vec<AugStep>), AugError>;

fn emit(
    out: &mut JobOutput,
    out_dir: &Path,
    rec: &SampleRecord,
    new_id: &str,
    op: &str,
    seed: u64,
    result: StepResult,
) -> Result<(), DatasetError> {
    match result {
        Ok((sample, steps)) => {
            let r = write_sample(out_dir, rec, new_id, &sample, augmented(&rec.id, seed, steps))?;
            out.records.push(r);
        }
        Err(e) => out.skipped.push(skip(&rec.id, op, e)),
    }
    Ok(())
}

fn augment_record(
    manifest: &Manifest,
    rec: &SampleRecord,
    ops: AugmentOps,
    validation_fold: Option<usize>,
    out_dir: &Path,
    opts: &MaterializeOptions,
) -> Result<JobOutput, DatasetError> {
    let mut out = JobOutput::default();
    let sample = match load_sample(manifest, rec) {
        Ok(s) => s,
        Err(e) => {
            out.skipped.push(skip(&rec.id, "load", e));
            return Ok(out);
        }
    };
    out.records
        .push(write_sample(out_dir, rec, &rec.id, &sample, rec.provenance.clone())?);
    let is_validation = validation_fold.is_some() && rec.fold == validation_fold;
    if is_validation {
        return Ok(out);
    }
    let seed = opts.master_seed;
    if ops.crop {
        for j in 0..opts.crops_per_image {
            let new_id = format!("{}__crop{j}", rec.id);
            let ctx = SeedContext::new(seed, new_id.as_str());
            let r = augment::random_crop(&sample, &ctx).map(|(s, st)| (s, vec![st]));
            emit(&mut out, out_dir, rec, &new_id, "crop", seed, r)?;
        }
    }
    if ops.d4 {
        // The identity element is the pass-through copy written above.
        for g in enumerate_d4().into_iter().skip(1) {
            let new_id = format!("{}__d4_{g}", rec.id);
            let (s, st) = augment::d4(&sample, g);
            emit(&mut out, out_dir, rec, &new_id, "d4", seed, Ok((s, vec![st])))?;
        }
    }
    if ops.color {
        let new_id = format!("{}__color", rec.id);
        let ctx = SeedContext::new(seed, new_id.as_str());
        let r = augment::random_color(&sample, opts.pca_model.as_ref(), &ctx).map(|(s, st)| (s, vec![st]));
        emit(&mut out, out_dir, rec, &new_id, "color", seed, r)?;
    }
    if ops.warp {
        let new_id = format!("{}__warp", rec.id);
        let ctx = SeedContext::new(seed, new_id.as_str());
        let r = augment::random_warp(&sample, &ctx, &opts.warp).map(|(s, st)| (s, vec![st]));
        emit(&mut out, out_dir, rec, &new_id, "warp", seed, r)?;
    }
    Ok(out)
}

fn balance_entry(manifest: &Manifest, entry: &PlanEntry, out_dir: &Path, opts: &MaterializeOptions) -> Result<JobOutput, DatasetError> {
    let mut out = JobOutput::default();
    let rec = manifest.get(&entry.id).ok_or_else(|| DatasetError::UnknownId(entry.id.clone()))?;
    let sample = match load_sample(manifest, rec) {
        Ok(s) => s,
        Err(e) => {
            out.skipped.push(skip(&rec.id, "load", e));
            return Ok(out);
        }
    };
    out.records
        .push(write_sample(out_dir, rec, &rec.id, &sample, rec.provenance.clone())?);
    let seed = opts.master_seed;
    for planned in &entry.augmentations {
        let ctx = SeedContext::new(seed, planned.new_id.as_str());
        let r = match planned.kind {
            AugKind::Geometric => augment::random_geometric(&sample, &ctx),
            AugKind::Color => augment::random_color(&sample, opts.pca_model.as_ref(), &ctx).map(|(s, st)| (s, vec![st])),
            AugKind::Warp => augment::random_warp(&sample, &ctx, &opts.warp).map(|(s, st)| (s, vec![st])),
        };
        emit(&mut out, out_dir, rec, &planned.new_id, planned.kind.as_str(), seed, r)?;
    }
    Ok(out)
}

fn finish_dir(dir: &Path, jobs: Vec<JobOutput>, report: &mut MaterializeReport) -> Result<(), DatasetError> {
    let mut records = Vec::new();
    for j in jobs {
        report.augmented += j.records.iter().filter(|r| !r.provenance.is_original()).count();
        records.extend(j.records);
        report.skipped.extend(j.skipped);
    }
    report.records_written += records.len();
    let manifest = Manifest::new(records, dir)?;
    manifest.save(dir.join(MANIFEST_FILE))?;
    report.manifests.push(manifest);
    Ok(())
}

/// Executes `plan` against `manifest`, writing images, masks, manifests and a
/// `report.txt` under `out_dir`.
///
/// Per-sample augmentation failures (missing mask, degenerate lesion, ...)
/// are logged and listed in the report; write failures abort the run.
pub fn materialize(
    plan: MaterializePlan<'_>,
    manifest: &Manifest,
    out_dir: &Path,
    opts: &MaterializeOptions,
) -> Result<MaterializeReport, DatasetError> {
    let pool = pool(opts.workers)?;
    let mut report = MaterializeReport::default();
    match plan {
        MaterializePlan::Augment { ops, validation_fold } => {
            if ops.color && opts.pca_model.is_none() {
                return Err(DatasetError::MissingPcaModel);
            }
            create_dir(&out_dir.join(IMAGES_DIR))?;
            create_dir(&out_dir.join(MASKS_DIR))?;
            info!("augmenting {} records with ops [{ops}] into {}", manifest.len(), out_dir.display());
            let jobs: Vec<JobOutput> = pool.install(|| {
                manifest
                    .records
                    .par_iter()
                    .map(|rec| augment_record(manifest, rec, ops, validation_fold, out_dir, opts))
                    .collect::<Result<_, _>>()
            })?;
            finish_dir(out_dir, jobs, &mut report)?;
        }
        MaterializePlan::Balance(bplan) => {
            let needs_color = bplan
                .subsets
                .iter()
                .flat_map(|s| &s.entries)
                .flat_map(|e| &e.augmentations)
                .any(|a| a.kind == AugKind::Color);
            if needs_color && opts.pca_model.is_none() {
                return Err(DatasetError::MissingPcaModel);
            }
            create_dir(out_dir)?;
            let plan_path = out_dir.join(PLAN_FILE);
            let json = serde_json::to_string_pretty(bplan).expect("plan serializes");
            fs::write(&plan_path, json + "\n").map_err(|e| DatasetError::io(&plan_path, e))?;
            for (k, subset) in bplan.subsets.iter().enumerate() {
                let dir = subset_dir(out_dir, k);
                create_dir(&dir.join(IMAGES_DIR))?;
                create_dir(&dir.join(MASKS_DIR))?;
                info!("materializing subset {k} ({} sources) into {}", subset.entries.len(), dir.display());
                let jobs: Vec<JobOutput> = pool.install(|| {
                    subset
                        .entries
                        .par_iter()
                        .map(|e| balance_entry(manifest, e, &dir, opts))
                        .collect::<Result<_, _>>()
                })?;
                finish_dir(&dir, jobs, &mut report)?;
            }
        }
    }
    let report_path = out_dir.join(REPORT_FILE);
    fs::write(&report_path, report.to_text()).map_err(|e| DatasetError::io(&report_path, e))?;
    Ok(report)
}

pub fn subset_dir(out_dir: &Path, k: usize) -> PathBuf {
    out_dir.join(format!("subset_{k:02}"))
}

/// Records whose fold differs from `validation_fold` (all records if `None`).
pub fn training_records(manifest: &Manifest, validation_fold: Option<usize>) -> Manifest {
    let mut out = manifest.clone();
    if let Some(v) = validation_fold {
        out.records.retain(|r| r.fold != Some(v));
    }
    out
}

/// Color PCA over every `stride`-th pixel of every record outside
/// `exclude_fold`. Images are accumulated in parallel and merged in
/// ascending id order.
pub fn fit_pca_from_manifest(
    manifest: &Manifest,
    stride: usize,
    exclude_fold: Option<usize>,
    workers: usize,
) -> Result<ColorPcaModel, DatasetError> {
    let train = training_records(manifest, exclude_fold);
    let mut recs: Vec<&SampleRecord> = train.records.iter().collect();
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    let parts: Vec<CovarianceAccumulator> = pool(workers)?.install(|| {
        recs.par_iter()
            .map(|r| {
                let img = load_image(train.resolve(&r.image))?;
                let mut acc = CovarianceAccumulator::new();
                acc.push_image(&img, stride);
                Ok(acc)
            })
            .collect::<Result<_, DatasetError>>()
    })?;
    let mut total = CovarianceAccumulator::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(ColorPcaModel::from_accumulator(&total)?)
}
