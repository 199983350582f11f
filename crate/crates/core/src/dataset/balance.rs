//! Class-balancing plans.
//!
//! Plans only name the augmentation kind for each extra copy; concrete
//! parameters are drawn when the plan is materialized, from the seed stream
//! of the new record id.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::manifest::{Label, Manifest};
use super::DatasetError;
use crate::rng::SeedContext;

pub const BALANCE_OP: &str = "balance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    /// Lesion-preserving crop followed by a non-identity rotation/flip.
    Geometric,
    Color,
    Warp,
}

impl AugKind {
    /// Order in which minority top-up copies cycle through the augmentations.
    pub const CYCLE: [AugKind; 3] = [AugKind::Geometric, AugKind::Color, AugKind::Warp];

    pub fn as_str(self) -> &'static str {
        match self {
            AugKind::Geometric => "geometric",
            AugKind::Color => "color",
            AugKind::Warp => "warp",
        }
    }
}

impl fmt::Display for AugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceStrategy {
    Oversample,
    Partition,
}

impl FromStr for BalanceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oversample" => Ok(Self::Oversample),
            "partition" => Ok(Self::Partition),
            _ => Err(format!("unknown strategy {s:?} (oversample|partition)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAug {
    pub kind: AugKind,
    /// Id given to the augmented copy; also keys its random stream.
    pub new_id: String,
}

/// A source sample used `multiplicity` times: once as itself plus one time
/// per scheduled augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub id: String,
    pub label: Label,
    pub multiplicity: usize,
    pub augmentations: Vec<PlannedAug>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BalanceSubset {
    pub entries: Vec<PlanEntry>,
}

impl BalanceSubset {
    /// Per-class sample counts including scheduled copies.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += e.multiplicity;
        }
        c
    }

    pub fn augmentation_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += e.augmentations.len();
        }
        c
    }

    pub fn ids_with_label(&self, label: Label) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(move |e| e.label == label).map(|e| e.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub strategy: BalanceStrategy,
    pub seed: u64,
    pub subsets: Vec<BalanceSubset>,
}

impl BalancePlan {
    pub fn scheduled_augmentations(&self) -> usize {
        self.subsets.iter().map(|s| s.augmentation_counts().iter().sum::<usize>()).sum()
    }
}

fn class_lists(manifest: &Manifest) -> Result<BTreeMap<Label, Vec<String>>, DatasetError> {
    let by = manifest.ids_by_label();
    for label in Label::ALL {
        if by.get(&label).is_none_or(|v| v.is_empty()) {
            return Err(DatasetError::EmptyClass(label));
        }
    }
    Ok(by)
}

fn shuffled(ids: &[String], seed: &SeedContext, tag: &str) -> Vec<String> {
    let mut v = ids.to_vec();
    seed.child(tag).rng(BALANCE_OP).shuffle(&mut v);
    v
}

/// Builds entries for `target` samples drawn from `pool` (already shuffled).
///
/// When the pool is large enough, `target` consecutive ids starting at
/// `offset` (cyclically) are used once each. Otherwise every id is used and
/// the shortfall is covered by augmented copies: copy `j` comes from
/// `pool[j % n]` with kind `CYCLE[j % 3]`.
fn fill_class(label: Label, pool: &[String], target: usize, offset: usize, id_prefix: &str) -> Vec<PlanEntry> {
    let n = pool.len();
    if n >= target {
        let mut entries: Vec<PlanEntry> = (0..target)
            .map(|i| PlanEntry {
                id: pool[(offset + i) % n].clone(),
                label,
                multiplicity: 1,
                augmentations: Vec::new(),
            })
            .collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        return entries;
    }
    let mut entries: Vec<PlanEntry> = pool
        .iter()
        .map(|id| PlanEntry {
            id: id.clone(),
            label,
            multiplicity: 1,
            augmentations: Vec::new(),
        })
        .collect();
    for j in 0..target - n {
        let kind = AugKind::CYCLE[j % 3];
        let e = &mut entries[j % n];
        let copy = e.augmentations.len();
        e.augmentations.push(PlannedAug {
            kind,
            new_id: format!("{}__{id_prefix}c{copy}_{kind}", e.id),
        });
        e.multiplicity += 1;
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    entries
}

/// One subset where every class is topped up to the majority count.
pub fn balance_oversample(manifest: &Manifest, seed: &SeedContext) -> Result<BalancePlan, DatasetError> {
    let by = class_lists(manifest)?;
    let target = by.values().map(Vec::len).max().unwrap_or(0);
    let mut entries = Vec::new();
    for (label, ids) in &by {
        let pool = shuffled(ids, seed, &format!("oversample:{label}"));
        entries.extend(fill_class(*label, &pool, target, 0, "os"));
    }
    entries.sort_by(|a, b| (a.label, &a.id).cmp(&(b.label, &b.id)));
    Ok(BalancePlan {
        strategy: BalanceStrategy::Oversample,
        seed: seed.master_seed,
        subsets: vec![BalanceSubset { entries }],
    })
}

/// Splits the majority class into `m = floor(n_majority / n_smallest)`
/// disjoint chunks (sizes differ by at most one, covering every majority id)
/// and builds one balanced subset per chunk. Other classes are subsampled
/// (rotating through their shuffled order) when larger than the chunk, or
/// used in full and topped up with augmented copies when smaller.
pub fn balance_partition(manifest: &Manifest, seed: &SeedContext) -> Result<BalancePlan, DatasetError> {
    let by = class_lists(manifest)?;
    let (majority, maj_ids) = by
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
        .map(|(l, v)| (*l, v.clone()))
        .expect("three classes");
    let smallest = by.values().map(Vec::len).min().unwrap_or(1);
    let m = (maj_ids.len() / smallest).max(1);

    let maj_pool = shuffled(&maj_ids, seed, &format!("partition:{majority}"));
    let base = maj_pool.len() / m;
    let extra = maj_pool.len() % m;
    let mut chunks = Vec::with_capacity(m);
    let mut start = 0;
    for c in 0..m {
        let len = base + usize::from(c < extra);
        chunks.push(&maj_pool[start..start + len]);
        start += len;
    }

    let others: Vec<(Label, Vec<String>)> = by
        .iter()
        .filter(|(l, _)| **l != majority)
        .map(|(l, ids)| (*l, shuffled(ids, seed, &format!("partition:{l}"))))
        .collect();

    let mut subsets = Vec::with_capacity(m);
    let mut offsets = vec![0usize; others.len()];
    for (k, chunk) in chunks.iter().enumerate() {
        let target = chunk.len();
        let mut entries = fill_class(majority, chunk, target, 0, &format!("p{k}"));
        for (o, (label, pool)) in others.iter().enumerate() {
            entries.extend(fill_class(*label, pool, target, offsets[o], &format!("p{k}")));
            offsets[o] = (offsets[o] + target) % pool.len();
        }
        entries.sort_by(|a, b| (a.label, &a.id).cmp(&(b.label, &b.id)));
        subsets.push(BalanceSubset { entries });
    }
    Ok(BalancePlan {
        strategy: BalanceStrategy::Partition,
        seed: seed.master_seed,
        subsets,
    })
}

pub fn balance(manifest: &Manifest, strategy: BalanceStrategy, seed: &SeedContext) -> Result<BalancePlan, DatasetError> {
    match strategy {
        BalanceStrategy::Oversample => balance_oversample(manifest, seed),
        BalanceStrategy::Partition => balance_partition(manifest, seed),
    }
}
