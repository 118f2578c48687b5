//! Run configuration: built-in defaults per domain, overlaid by a JSON file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use relher_core::eval::generate::SizeRange;
use relher_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: SizeRange,
    pub validation: SizeRange,
    pub test: SizeRange,
    /// Seed for the instance generators (independent of the training seed).
    pub seed: u64,
}

impl Splits {
    /// Desk-scale splits: train on small instances, select checkpoints on
    /// medium ones, test on larger ones.
    pub fn for_domain(domain: &str) -> Splits {
        let (train, validation, test) = match domain {
            "gripper" => (SizeRange::each(1, 3), SizeRange::each(6, 7), SizeRange::each(4, 5)),
            "maze" => (
                SizeRange { min: 3, max: 5, count: 9 },
                SizeRange { min: 6, max: 6, count: 3 },
                SizeRange { min: 7, max: 8, count: 6 },
            ),
            _ => (
                SizeRange { min: 2, max: 10, count: 25 },
                SizeRange { min: 11, max: 12, count: 4 },
                SizeRange { min: 13, max: 15, count: 6 },
            ),
        };
        Splits {
            train,
            validation,
            test,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in domain name or path to a domain file.
    pub domain: String,
    /// Directories of problem files; generated splits are used when absent.
    pub instances: Option<PathBuf>,
    pub validation_instances: Option<PathBuf>,
    pub test_instances: Option<PathBuf>,
    pub splits: Splits,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub trainer: TrainConfig,
}

impl RunConfig {
    pub fn defaults(domain: &str) -> RunConfig {
        let builtin = Path::new(domain)
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| relher_core::domains::source(s).is_some())
            .unwrap_or(domain);
        let mut trainer = TrainConfig::default();
        if builtin == "gripper" {
            // Generalization from 1-3 balls varies a lot between nearby
            // checkpoints, so validate often.
            trainer.validation_interval = 5;
        }
        RunConfig {
            domain: domain.to_string(),
            instances: None,
            validation_instances: None,
            test_instances: None,
            splits: Splits::for_domain(builtin),
            threads: 1,
            out: None,
            trainer,
        }
    }

    /// Defaults for `domain` with the JSON document at `path` laid over them.
    /// Objects merge key by key; any other value replaces the default.
    pub fn with_file(domain: &str, path: Option<&Path>) -> Result<RunConfig> {
        let mut value = serde_json::to_value(RunConfig::defaults(domain))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let overlay: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            if !overlay.is_object() {
                bail!("config {} must be a JSON object", path.display());
            }
            merge(&mut value, overlay);
        }
        // The flag names the domain even if the file says otherwise.
        value["domain"] = Value::String(domain.to_string());
        serde_json::from_value(value).context("invalid configuration")
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
