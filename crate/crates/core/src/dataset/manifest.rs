use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::provenance::Provenance;
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Melanoma,
    SeborrheicKeratosis,
    Nevus,
}

impl Label {
    /// Same order as the probability columns of a prediction file.
    pub const ALL: [Label; 3] = [Label::Melanoma, Label::SeborrheicKeratosis, Label::Nevus];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Melanoma => "melanoma",
            Label::SeborrheicKeratosis => "seborrheic_keratosis",
            Label::Nevus => "nevus",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Melanoma => 0,
            Label::SeborrheicKeratosis => 1,
            Label::Nevus => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label {s:?}"))
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    /// Path relative to the manifest's directory (or absolute).
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl SampleRecord {
    pub fn original(id: impl Into<String>, image: impl Into<String>, mask: Option<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            image: image.into(),
            mask,
            label,
            fold: None,
            provenance: Provenance::Original,
        }
    }
}

/// Ids double as file stems, so they are restricted to `[A-Za-z0-9._-]`.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// Records plus the directory their relative paths are resolved against.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<SampleRecord>, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let m = Self {
            records,
            base_dir: base_dir.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !valid_id(&r.id) {
                return Err(DatasetError::BadId(r.id.clone()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: SampleRecord = serde_json::from_str(line).map_err(|e| DatasetError::ManifestParse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::new(records, base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| DatasetError::io(path, e))
    }

    /// Copy whose relative paths resolve to the same files when the manifest
    /// is written to `manifest_path`. The target directory must exist.
    pub fn rebased_for(&self, manifest_path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let new_base = match manifest_path.as_ref().parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let canon = |p: &Path| {
            let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
            p.canonicalize().map_err(|e| DatasetError::io(p, e))
        };
        let old = canon(&self.base_dir)?;
        let new = canon(&new_base)?;
        let rebase = |rel: &str| -> String {
            if Path::new(rel).is_absolute() {
                return rel.to_string();
            }
            relative_path(&old.join(rel), &new).to_string_lossy().replace('\\', "/")
        };
        let mut out = self.clone();
        for r in &mut out.records {
            r.image = rebase(&r.image);
            r.mask = r.mask.as_deref().map(rebase);
        }
        out.base_dir = new_base;
        Ok(out)
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Ids per label, each list sorted.
    pub fn ids_by_label(&self) -> BTreeMap<Label, Vec<String>> {
        let mut by: BTreeMap<Label, Vec<String>> = BTreeMap::new();
        for r in &self.records {
            by.entry(r.label).or_default().push(r.id.clone());
        }
        for v in by.values_mut() {
            v.sort();
        }
        by
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }
}

/// `target` expressed relative to directory `base`; both absolute.
fn relative_path(target: &Path, base: &Path) -> PathBuf {
    use std::path::Component;
    fn norm(p: &Path) -> Vec<Component<'_>> {
        let mut out: Vec<Component<'_>> = Vec::new();
        for c in p.components() {
            match c {
                Component::CurDir => {}
                Component::ParentDir if matches!(out.last(), Some(Component::Normal(_))) => {
                    out.pop();
                }
                other => out.push(other),
            }
        }
        out
    }
    let t = norm(target);
    let b = norm(base);
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c.as_os_str());
    }
    rel
}
