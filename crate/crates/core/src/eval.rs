//! Committee averaging and ROC AUC metrics over prediction files.
//!
//! Prediction CSV: header `id,p_melanoma,p_keratosis,p_nevus`.
//! Truth CSV: header `id,label` with labels `melanoma`, `nevus`,
//! `seborrheic_keratosis`.
//!
//! The score is the mean of the melanoma-vs-rest and keratosis-vs-rest AUCs.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;

/// Cutoff for the reported accuracy/sensitivity/specificity.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("committee has no members")]
    EmptyCommittee,
    #[error("id sets differ: {0}")]
    IdSetMismatch(String),
    #[error("need at least one positive and one negative sample")]
    DegenerateLabels,
    #[error("{path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Per-id probabilities `(p_melanoma, p_keratosis, p_nevus)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub entries: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Deserialize, Serialize)]
struct PredictionRow {
    id: String,
    p_melanoma: f64,
    p_keratosis: f64,
    p_nevus: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct TruthRow {
    id: String,
    label: String,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |source| EvalError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn bad(path: &Path, reason: String) -> EvalError {
    EvalError::BadFile {
        path: path.display().to_string(),
        reason,
    }
}

impl PredictionSet {
    pub fn new(entries: BTreeMap<String, [f64; 3]>) -> Result<Self, String> {
        for (id, p) in &entries {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("probability outside [0,1] for {id}: {p:?}"));
            }
        }
        Ok(Self { entries })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn column(&self, label: Label) -> BTreeMap<String, f64> {
        self.entries.iter().map(|(id, p)| (id.clone(), p[label.index()])).collect()
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err(path))?;
        let headers = rdr.headers().map_err(csv_err(path))?.clone();
        let want = ["id", "p_melanoma", "p_keratosis", "p_nevus"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(bad(path, format!("header must be {}", want.join(","))));
        }
        let mut entries = BTreeMap::new();
        for row in rdr.deserialize::<PredictionRow>() {
            let row = row.map_err(csv_err(path))?;
            if entries
                .insert(row.id.clone(), [row.p_melanoma, row.p_keratosis, row.p_nevus])
                .is_some()
            {
                return Err(bad(path, format!("duplicate id {:?}", row.id)));
            }
        }
        Self::new(entries).map_err(|r| bad(path, r))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        for (id, p) in &self.entries {
            w.serialize(PredictionRow {
                id: id.clone(),
                p_melanoma: p[0],
                p_keratosis: p[1],
                p_nevus: p[2],
            })
            .map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| csv_err(path)(e.into()))
    }
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, Label>, EvalError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<TruthRow>() {
        let row = row.map_err(csv_err(path))?;
        let label: Label = row.label.parse().map_err(|e: String| bad(path, e))?;
        if out.insert(row.id.clone(), label).is_some() {
            return Err(bad(path, format!("duplicate id {:?}", row.id)));
        }
    }
    Ok(out)
}

fn describe_mismatch<'a>(a: impl Iterator<Item = &'a str>, b: impl Iterator<Item = &'a str>) -> Option<String> {
    let a: HashSet<&str> = a.collect();
    let b: HashSet<&str> = b.collect();
    if a == b {
        return None;
    }
    let mut only_a: Vec<&&str> = a.difference(&b).collect();
    let mut only_b: Vec<&&str> = b.difference(&a).collect();
    only_a.sort();
    only_b.sort();
    Some(format!(
        "{} ids only on the left (first: {:?}), {} only on the right (first: {:?})",
        only_a.len(),
        only_a.first(),
        only_b.len(),
        only_b.first()
    ))
}

/// Per-id arithmetic mean of the members' probability vectors.
pub fn aggregate_mean(members: &[PredictionSet]) -> Result<PredictionSet, EvalError> {
    let first = members.first().ok_or(EvalError::EmptyCommittee)?;
    for m in &members[1..] {
        if let Some(msg) = describe_mismatch(first.ids(), m.ids()) {
            return Err(EvalError::IdSetMismatch(msg));
        }
    }
    let n = members.len() as f64;
    let entries = first
        .entries
        .keys()
        .map(|id| {
            let mut sum = [0.0; 3];
            for m in members {
                let p = m.entries[id];
                for k in 0..3 {
                    sum[k] += p[k];
                }
            }
            (id.clone(), sum.map(|s| s / n))
        })
        .collect();
    Ok(PredictionSet { entries })
}

/// Mann-Whitney AUC: `(concordant + ties / 2) / (positives * negatives)`.
///
/// Sorts once and counts, for each group of tied scores, the negatives
/// strictly below and tied with each positive.
pub fn roc_auc_slices(scores: &[f64], is_positive: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), is_positive.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut pos, mut neg) = (0u64, 0u64);
    // Twice the Mann-Whitney numerator, kept integral.
    let mut half_units = 0u64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut gp, mut gn) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]].total_cmp(&scores[idx[i]]).is_eq() {
            if is_positive[idx[j]] {
                gp += 1;
            } else {
                gn += 1;
            }
            j += 1;
        }
        half_units += gp * (2 * neg + gn);
        pos += gp;
        neg += gn;
        i = j;
    }
    if pos == 0 || neg == 0 {
        return Err(EvalError::DegenerateLabels);
    }
    Ok(half_units as f64 * 0.5 / (pos * neg) as f64)
}

pub fn roc_auc(scores: &BTreeMap<String, f64>, positives: &HashSet<String>) -> Result<f64, EvalError> {
    let (s, p): (Vec<f64>, Vec<bool>) = scores.iter().map(|(id, &v)| (v, positives.contains(id))).unzip();
    roc_auc_slices(&s, &p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc_melanoma: f64,
    pub auc_keratosis: f64,
    pub mean_auc: f64,
    /// Melanoma-vs-rest decision at `p_melanoma >= 0.5`.
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub samples: usize,
}

impl MetricsReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("auc_melanoma", self.auc_melanoma),
            ("auc_keratosis", self.auc_keratosis),
            ("mean_auc", self.mean_auc),
            ("accuracy", self.accuracy),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "samples={}", self.samples);
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24}{:>10}", "metric", "value");
        let _ = writeln!(s, "{}", "-".repeat(34));
        for (k, v) in [
            ("AUC melanoma", self.auc_melanoma),
            ("AUC keratosis", self.auc_keratosis),
            ("score (mean AUC)", self.mean_auc),
            ("accuracy @0.5", self.accuracy),
            ("sensitivity @0.5", self.sensitivity),
            ("specificity @0.5", self.specificity),
        ] {
            let _ = writeln!(s, "{k:<24}{v:>10.4}");
        }
        let _ = writeln!(s, "{:<24}{:>10}", "samples", self.samples);
        s
    }
}

pub fn challenge_score(preds: &PredictionSet, truth: &BTreeMap<String, Label>) -> Result<MetricsReport, EvalError> {
    if let Some(msg) = describe_mismatch(preds.ids(), truth.keys().map(String::as_str)) {
        return Err(EvalError::IdSetMismatch(msg));
    }
    let positives = |label: Label| -> HashSet<String> { truth.iter().filter(|(_, &l)| l == label).map(|(id, _)| id.clone()).collect() };
    let auc_melanoma = roc_auc(&preds.column(Label::Melanoma), &positives(Label::Melanoma))?;
    let auc_keratosis = roc_auc(&preds.column(Label::SeborrheicKeratosis), &positives(Label::SeborrheicKeratosis))?;

    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (id, p) in &preds.entries {
        let predicted = p[0] >= DECISION_THRESHOLD;
        let actual = truth[id] == Label::Melanoma;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(MetricsReport {
        auc_melanoma,
        auc_keratosis,
        mean_auc: (auc_melanoma + auc_keratosis) / 2.0,
        accuracy: ratio(tp + tn, preds.entries.len()),
        sensitivity: ratio(tp, tp + fneg),
        specificity: ratio(tn, tn + fp),
        samples: preds.entries.len(),
    })
}
