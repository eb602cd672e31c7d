//! Run configuration: a TOML file with one table per pipeline stage.
//!
//! Every key is optional. Unknown keys are rejected, and each resolved key
//! remembers whether it came from the defaults, the file or a command-line
//! flag.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, TrainConfig};
use crate::preprocess::{ClaheParams, EnhanceConfig};
use crate::quality::QualityThresholds;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "AMDNET_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Directory holding one subdirectory per class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    pub test_fraction: f64,
    pub seed: u64,
    /// Keep images the quality gate rejects.
    pub include_all: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            root: None,
            test_fraction: 0.2,
            seed: 0,
            include_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaConfig {
    pub gamma_enabled: bool,
    pub gamma: f64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            gamma_enabled: false,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub batch_size: usize,
    /// `eval` exits with a nonzero status below this accuracy.
    pub accuracy_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            accuracy_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub quality: QualityThresholds,
    pub clahe: ClaheParams,
    pub enhance: GammaConfig,
    pub augment: AugmentConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let f = self.dataset.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "dataset.test_fraction must be in (0, 1), got {f}"
            )));
        }
        self.quality.validate()?;
        self.enhance_config().validate()?;
        self.augment.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.eval.batch_size == 0 {
            return Err(Error::Config("eval.batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eval.accuracy_floor) {
            return Err(Error::Config(format!(
                "eval.accuracy_floor must be in [0, 1], got {}",
                self.eval.accuracy_floor
            )));
        }
        Ok(())
    }

    /// Enhancement chain producing images at the model's input size.
    pub fn enhance_config(&self) -> EnhanceConfig {
        EnhanceConfig {
            clahe: self.clahe,
            gamma_enabled: self.enhance.gamma_enabled,
            gamma: self.enhance.gamma,
            output_size: self.model.input_size,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    File,
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Default => "default",
            Origin::File => "file",
            Origin::Flag => "flag",
        })
    }
}

/// Where each dotted key's value came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub keys: BTreeMap<String, Origin>,
}

impl Provenance {
    pub fn origin(&self, key: &str) -> Origin {
        self.keys.get(key).copied().unwrap_or(Origin::Default)
    }

    pub fn set(&mut self, key: &str, origin: Origin) {
        self.keys.insert(key.to_string(), origin);
    }

    /// True when any key under `section.` was set outside the defaults.
    pub fn section_overridden(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.keys
            .iter()
            .any(|(k, &o)| k.starts_with(&prefix) && o != Origin::Default)
    }
}

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub provenance: Provenance,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn default_keys() -> Vec<(String, toml::Value)> {
    let table: toml::Table =
        toml::from_str(&RunConfig::default().to_toml()).expect("defaults parse");
    let mut keys = Vec::new();
    flatten("", &table, &mut keys);
    // `dataset.root` has no default value but is still a key.
    keys.push(("dataset.root".into(), toml::Value::String(String::new())));
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    keys
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let config: RunConfig = RunConfig::deserialize(toml::Value::Table(table.clone()))
        .map_err(|e| Error::Config(e.message().to_string()))?;
    config.validate()?;
    let mut user = Vec::new();
    flatten("", &table, &mut user);
    let mut provenance = Provenance::default();
    for (key, _) in default_keys() {
        provenance.set(&key, Origin::Default);
    }
    for (key, _) in user {
        provenance.set(&key, Origin::File);
    }
    Ok(ParsedConfig { config, provenance })
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Keys whose defaults are the published training and enhancement settings;
/// every other default is an implementation choice.
const PUBLISHED_DEFAULTS: &[&str] = &[
    "augment.brightness_delta",
    "augment.contrast_range",
    "augment.p_hflip",
    "augment.p_vflip",
    "augment.saturation_range",
    "clahe.clip_limit",
    "clahe.grid",
    "dataset.test_fraction",
    "model.block_filters",
    "model.channels",
    "model.classes",
    "model.convs_per_block",
    "model.dropout_rate",
    "model.fc_units",
    "model.input_size",
    "model.lstm_units",
    "train.batch_size",
    "train.decay_rate",
    "train.decay_step",
    "train.epochs",
    "train.lr0",
];

/// Every configuration key with its default value and where that default
/// comes from, one per line.
pub fn describe_keys() -> String {
    let mut out = String::from("Configuration keys (TOML, all optional):\n");
    for (key, value) in default_keys() {
        let shown = if key == "dataset.root" {
            "<unset>".to_string()
        } else {
            value.to_string()
        };
        let source = if PUBLISHED_DEFAULTS.contains(&key.as_str()) {
            "published"
        } else {
            "chosen"
        };
        let _ = writeln!(out, "  {key} = {shown}  [{source}]");
    }
    let _ = writeln!(
        out,
        "\nThe config file defaults to ${CONFIG_ENV} when --config is not given."
    );
    out
}

/// `key,value,origin` for every resolved key.
pub fn provenance_csv(parsed: &ParsedConfig) -> String {
    let table: toml::Table = toml::from_str(&parsed.config.to_toml()).expect("config parses");
    let mut keys = Vec::new();
    flatten("", &table, &mut keys);
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::from("key,value,origin\n");
    for (key, value) in keys {
        let v = value.to_string().replace('"', "");
        let _ = writeln!(out, "{key},\"{v}\",{}", parsed.provenance.origin(&key));
    }
    out
}
