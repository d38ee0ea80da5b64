//! Layered settings: built-in defaults < `--config FILE` < command-line flags.
//!
//! The config file is flat `key = value` text, one entry per line, keys
//! spelled like the long flags. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vpc_core::VpcError;

pub const KEYS: &[&str] = &[
    "experiment",
    "seed",
    "seeds",
    "out",
    "channels",
    "classes",
    "samples",
    "sigma",
    "amplitude",
    "circuit",
    "blocks",
    "epochs",
    "lr",
    "optimizer",
    "batch",
    "max-evals",
    "hidden",
    "train-frac",
    "val-frac",
    "test-frac",
    "kink-guard",
    "data",
    "run",
    "split",
    "tol",
    "fd-step",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file_text(text: &str, origin: &Path) -> Result<Self, VpcError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| VpcError::Config(format!(
                "{}:{}: expected `key = value`",
                origin.display(),
                i + 1
            )))?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(VpcError::Config(format!(
                    "{}:{}: unknown key `{key}`",
                    origin.display(),
                    i + 1
                )));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> Result<Self, VpcError> {
        let text = fs::read_to_string(path).map_err(|e| VpcError::io(path, e))?;
        Self::parse_file_text(&text, path)
    }

    /// Flags given on the command line win over anything already present.
    pub fn set<T: ToString>(&mut self, key: &str, value: Option<T>) {
        debug_assert!(KEYS.contains(&key), "{key}");
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, VpcError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| VpcError::Config(format!("`{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, VpcError> {
        self.raw(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(VpcError::Config(format!("`{key}`: expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
