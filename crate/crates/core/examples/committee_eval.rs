//! Average three noisy classifiers into a committee and score it.
//!
//! ```text
//! cargo run --example committee_eval
//! ```

use std::collections::BTreeMap;

use lesion_aug::dataset::Label;
use lesion_aug::eval::{aggregate_mean, challenge_score, PredictionSet};
use lesion_aug::SampleRng;

fn noisy_member(truth: &BTreeMap<String, Label>, noise: f64, key: u64) -> PredictionSet {
    let mut rng = SampleRng::from_key(key);
    let entries = truth
        .iter()
        .map(|(id, label)| {
            let mut p = [0.0; 3];
            for (k, v) in p.iter_mut().enumerate() {
                let hit = if label.index() == k { 0.6 } else { 0.2 };
                *v = (hit + rng.normal(0.0, noise)).clamp(0.01, 1.0);
            }
            let sum: f64 = p.iter().sum();
            (id.clone(), p.map(|v| v / sum))
        })
        .collect();
    PredictionSet::new(entries).expect("probabilities in range")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SampleRng::from_key(1);
    let truth: BTreeMap<String, Label> = (0..600)
        .map(|i| {
            let u = rng.next_f64();
            let label = if u < 0.19 {
                Label::Melanoma
            } else if u < 0.32 {
                Label::SeborrheicKeratosis
            } else {
                Label::Nevus
            };
            (format!("ISIC_{i:07}"), label)
        })
        .collect();

    let members: Vec<PredictionSet> = (0..3).map(|m| noisy_member(&truth, 0.3, 100 + m)).collect();
    for (i, m) in members.iter().enumerate() {
        let r = challenge_score(m, &truth)?;
        println!("member {i}: mean AUC {:.4}", r.mean_auc);
    }
    let committee = aggregate_mean(&members)?;
    let report = challenge_score(&committee, &truth)?;
    println!("\ncommittee of {}:\n{}", members.len(), report.to_table());
    Ok(())
}
