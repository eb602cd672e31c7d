use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{ClassLabel, Manifest};
use crate::error::{Error, Result};
use crate::seed::{self, STREAM_SPLIT};

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Manifest,
    pub test: Manifest,
    pub seed: u64,
    pub fraction: f64,
}

/// Per class, shuffles the path-sorted entries and moves the first
/// `round(fraction * count)` of them to the test side.
pub fn stratified_split(manifest: &Manifest, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut train = Manifest::default();
    let mut test = Manifest::default();
    for label in ClassLabel::ALL {
        let mut class: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| e.label == label)
            .cloned()
            .collect();
        class.sort_by(|a, b| a.path.cmp(&b.path));
        let mut rng = seed::stream(seed, &[STREAM_SPLIT, label.index() as u64]);
        class.shuffle(&mut rng);
        let n_test = (fraction * class.len() as f64).round() as usize;
        let rest = class.split_off(n_test);
        test.entries.extend(class);
        train.entries.extend(rest);
    }
    Ok(Split {
        train,
        test,
        seed,
        fraction,
    })
}

/// Audit record of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub fraction: f64,
    pub test: Vec<PathBuf>,
}

impl Split {
    pub fn record(&self) -> SplitRecord {
        SplitRecord {
            seed: self.seed,
            fraction: self.fraction,
            test: self.test.entries.iter().map(|e| e.path.clone()).collect(),
        }
    }
}

impl SplitRecord {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("split record serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}
