//! Stratified five-fold split of a 2000-record manifest with a skewed label mix.
//!
//! ```text
//! cargo run --example stratified_folds -- [seed]
//! ```

use lesion_aug::dataset::{stratified_kfold, Label, Manifest, SampleRecord};
use lesion_aug::SeedContext;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2017);
    let mut records = Vec::new();
    for (label, n) in [(Label::Melanoma, 374), (Label::SeborrheicKeratosis, 254), (Label::Nevus, 1372)] {
        for i in 0..n {
            let id = format!("{label}_{i:04}");
            records.push(SampleRecord::original(id.clone(), format!("images/{id}.png"), None, label));
        }
    }
    let manifest = Manifest::new(records, ".")?;
    let plan = stratified_kfold(&manifest, 5, &SeedContext::new(seed, "split"))?;

    println!("{:<6}{:>8}{:>10}{:>10}{:>8}", "fold", "size", "melanoma", "keratosis", "nevus");
    for (f, (size, c)) in plan.fold_sizes().iter().zip(plan.class_counts(&manifest)).enumerate() {
        println!("{f:<6}{size:>8}{:>10}{:>10}{:>8}", c[0], c[1], c[2]);
    }
    let labelled = plan.apply(&manifest);
    println!("first record: {}", serde_json::to_string(&labelled.records[0])?);
    Ok(())
}
