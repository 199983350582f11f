//! Full pipeline on a synthetic dataset: split, color PCA, augmentation,
//! balancing and a contact sheet, all through the library API.
//!
//! ```text
//! cargo run --release --example synthetic_pipeline -- [out_dir] [workers]
//! ```

use std::path::PathBuf;

use lesion_aug::dataset::{
    balance_partition, fit_pca_from_manifest, materialize, stratified_kfold, AugmentOps, Label, Manifest, MaterializeOptions,
    MaterializePlan, SampleRecord,
};
use lesion_aug::preview::contact_sheet;
use lesion_aug::synth::synthetic_lesion;
use lesion_aug::{load_image, save_image, save_mask, SeedContext};

const SEED: u64 = 2017;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/examples-out/pipeline".into()));
    let workers: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let data = out.join("data");
    std::fs::create_dir_all(data.join("images"))?;
    std::fs::create_dir_all(data.join("masks"))?;

    let mix = [
        Label::Nevus,
        Label::Melanoma,
        Label::Nevus,
        Label::SeborrheicKeratosis,
        Label::Nevus,
        Label::Nevus,
    ];
    let mut records = Vec::new();
    for i in 0..30 {
        let id = format!("SYN_{i:04}");
        let s = synthetic_lesion(96, 80, &SeedContext::new(SEED, id.as_str()));
        save_image(&s.image, data.join(format!("images/{id}.png")))?;
        save_mask(&s.mask, data.join(format!("masks/{id}.png")))?;
        records.push(SampleRecord::original(
            id.clone(),
            format!("images/{id}.png"),
            Some(format!("masks/{id}.png")),
            mix[i % mix.len()],
        ));
    }
    let manifest = Manifest::new(records, &data)?;

    let folds = stratified_kfold(&manifest, 3, &SeedContext::new(SEED, "split"))?;
    let manifest = folds.apply(&manifest);
    manifest.save(data.join("manifest.jsonl"))?;
    println!("folds {:?}", folds.fold_sizes());

    let model = fit_pca_from_manifest(&manifest, 2, Some(0), workers)?;
    println!("color eigenvalues {:?}", model.eigenvalues);

    let mut opts = MaterializeOptions::new(SEED);
    opts.pca_model = Some(model);
    opts.workers = workers;
    let report = materialize(
        MaterializePlan::Augment {
            ops: AugmentOps::all(),
            validation_fold: Some(0),
        },
        &manifest,
        &out.join("augmented"),
        &opts,
    )?;
    println!(
        "augment: {} records ({} augmented, {} skipped)",
        report.records_written,
        report.augmented,
        report.skipped.len()
    );

    let plan = balance_partition(&manifest, &SeedContext::new(SEED, "balance"))?;
    let report = materialize(MaterializePlan::Balance(&plan), &manifest, &out.join("balanced"), &opts)?;
    for (k, m) in report.manifests.iter().enumerate() {
        println!("balanced subset {k}: {:?}", m.class_counts());
    }

    let aug = &Manifest::load(out.join("augmented/manifest.jsonl"))?;
    let first: Vec<_> = aug
        .records
        .iter()
        .take(24)
        .map(|r| load_image(aug.resolve(&r.image)))
        .collect::<Result<_, _>>()?;
    save_image(&contact_sheet(&first, 4, 6).expect("images"), out.join("sheet.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
