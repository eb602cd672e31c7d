//! Directory-per-class corpus scanning and the persisted manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{is_image_path, load_rgb};
use crate::quality::{assess_quality, QualityThresholds};

/// The four target classes in one-hot index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "AMD")]
    Amd,
    Cataract,
    Diabetes,
    Normal,
}

pub const CLASS_COUNT: usize = 4;

impl ClassLabel {
    pub const ALL: [ClassLabel; CLASS_COUNT] = [
        ClassLabel::Amd,
        ClassLabel::Cataract,
        ClassLabel::Diabetes,
        ClassLabel::Normal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Amd => "AMD",
            ClassLabel::Cataract => "Cataract",
            ClassLabel::Diabetes => "Diabetes",
            ClassLabel::Normal => "Normal",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    /// Case-insensitive class directory name.
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateDecision {
    Unchecked,
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: ClassLabel,
    pub decision: GateDecision,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for e in &self.entries {
            counts[e.label.index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label.index()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::Validation(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let entries = r
            .deserialize()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let manifest = Self { entries };
        manifest.validate()?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub manifest: Manifest,
    /// Files with an image extension whose header could not be decoded.
    pub skipped: Vec<PathBuf>,
    pub empty_classes: Vec<ClassLabel>,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

/// Lists `root/<Class>/*.{png,jpg,jpeg}`. Subdirectories that are not one of
/// the four classes are an error.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<ScanReport> {
    let root = root.as_ref();
    let source = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut class_dirs = BTreeMap::new();
    let mut unknown = Vec::new();
    for path in read_dir_sorted(root)? {
        if !path.is_dir() {
            continue;
        }
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        match name.parse::<ClassLabel>() {
            Ok(label) => {
                class_dirs.insert(label, path);
            }
            Err(_) => unknown.push(name),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownClasses {
            root: root.to_path_buf(),
            names: unknown,
        });
    }
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut empty_classes = Vec::new();
    for label in ClassLabel::ALL {
        let Some(dir) = class_dirs.get(&label) else {
            empty_classes.push(label);
            continue;
        };
        let before = entries.len();
        for path in read_dir_sorted(dir)? {
            if !path.is_file() || !is_image_path(&path) {
                continue;
            }
            if image::image_dimensions(&path).is_err() {
                log::warn!("skipping unreadable image {}", path.display());
                skipped.push(path);
                continue;
            }
            entries.push(ManifestEntry {
                path,
                label,
                decision: GateDecision::Unchecked,
                source: source.clone(),
            });
        }
        if entries.len() == before {
            empty_classes.push(label);
        }
    }
    for label in &empty_classes {
        log::warn!("class {label} has no images under {}", root.display());
    }
    let manifest = Manifest { entries };
    let counts = manifest.class_counts();
    log::info!(
        "scanned {}: {} images ({}), {} skipped",
        root.display(),
        manifest.len(),
        ClassLabel::ALL
            .iter()
            .map(|c| format!("{c}={}", counts[c.index()]))
            .collect::<Vec<_>>()
            .join(" "),
        skipped.len()
    );
    Ok(ScanReport {
        manifest,
        skipped,
        empty_classes,
    })
}

/// Runs the quality gate on every entry. Rejected entries are dropped unless
/// `include_all` is set; undecodable images are always dropped.
pub fn gate_manifest(
    manifest: &Manifest,
    thresholds: &QualityThresholds,
    include_all: bool,
) -> Result<Manifest> {
    thresholds.validate()?;
    let mut entries = Vec::with_capacity(manifest.len());
    for e in &manifest.entries {
        let img = match load_rgb(&e.path) {
            Ok(img) => img,
            Err(err) => {
                log::warn!("skipping {err}");
                continue;
            }
        };
        let report = assess_quality(&img, thresholds);
        let decision = if report.accepted() {
            GateDecision::Accept
        } else {
            log::debug!("{} rejected: {}", e.path.display(), report.reason_codes());
            GateDecision::Reject
        };
        if decision == GateDecision::Accept || include_all {
            entries.push(ManifestEntry {
                decision,
                ..e.clone()
            });
        }
    }
    Ok(Manifest { entries })
}
