//! Oversampling and majority-partition balancing plans on a skewed label mix.
//!
//! ```text
//! cargo run --example balance_plans
//! ```

use lesion_aug::dataset::{balance, BalanceStrategy, Label, Manifest, SampleRecord};
use lesion_aug::SeedContext;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut records = Vec::new();
    for (label, n) in [(Label::Melanoma, 374), (Label::SeborrheicKeratosis, 254), (Label::Nevus, 1372)] {
        for i in 0..n {
            let id = format!("{label}_{i:04}");
            records.push(SampleRecord::original(id.clone(), format!("images/{id}.png"), None, label));
        }
    }
    let manifest = Manifest::new(records, ".")?;
    println!("input counts {:?}", manifest.class_counts());

    for strategy in [BalanceStrategy::Oversample, BalanceStrategy::Partition] {
        let plan = balance(&manifest, strategy, &SeedContext::new(42, "balance"))?;
        println!(
            "\n{strategy:?}: {} subset(s), {} scheduled copies",
            plan.subsets.len(),
            plan.scheduled_augmentations()
        );
        for (k, s) in plan.subsets.iter().enumerate() {
            println!("  subset {k}: counts {:?} copies {:?}", s.class_counts(), s.augmentation_counts());
        }
        let example = plan.subsets[0].entries.iter().find(|e| !e.augmentations.is_empty());
        if let Some(e) = example {
            let ids: Vec<_> = e.augmentations.iter().map(|a| a.new_id.as_str()).collect();
            println!("  e.g. {} -> {ids:?}", e.id);
        }
    }
    Ok(())
}
