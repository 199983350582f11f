use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::manifest::{Label, Manifest};
use super::DatasetError;
use crate::rng::SeedContext;

pub const SPLIT_OP: &str = "split";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// `counts[fold][label.index()]`.
    pub fn class_counts(&self, manifest: &Manifest) -> Vec<[usize; 3]> {
        let mut counts = vec![[0usize; 3]; self.k];
        for r in &manifest.records {
            if let Some(&f) = self.assignment.get(&r.id) {
                counts[f][r.label.index()] += 1;
            }
        }
        counts
    }

    /// Copy of `manifest` with the `fold` field filled in.
    pub fn apply(&self, manifest: &Manifest) -> Manifest {
        let mut out = manifest.clone();
        for r in &mut out.records {
            r.fold = self.assignment.get(&r.id).copied();
        }
        out
    }
}

/// Stratified k-fold assignment.
///
/// Ids of each class are sorted, shuffled with the class's own stream, and
/// the classes are concatenated in label order. Item `i` of that sequence
/// goes to fold `i mod k`, so fold sizes differ by at most one and so do the
/// per-class counts of any two folds.
pub fn stratified_kfold(manifest: &Manifest, k: usize, seed: &SeedContext) -> Result<FoldPlan, DatasetError> {
    if k < 2 {
        return Err(DatasetError::BadK(k));
    }
    let by_label = manifest.ids_by_label();
    for (label, ids) in &by_label {
        if ids.len() < k {
            return Err(DatasetError::TooFewSamples {
                label: *label,
                have: ids.len(),
                need: k,
            });
        }
    }
    let mut assignment = BTreeMap::new();
    let mut cursor = 0usize;
    for label in Label::ALL {
        let Some(ids) = by_label.get(&label) else { continue };
        let mut order = ids.clone();
        seed.child(format!("{}:{label}", seed.sample_id)).rng(SPLIT_OP).shuffle(&mut order);
        for id in order {
            assignment.insert(id, cursor % k);
            cursor += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed: seed.master_seed,
    })
}
