//! Optional flat `key=value` config files. Command-line flags win over the
//! config file, which wins over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use segtool::{Result, SegError};

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "jobs",
    "merges",
    "min_len",
    "max_len",
    "train_fraction",
    "max_documents",
    "under_rate",
    "over_rate",
    "noise_mode",
    "token_embed_dim",
    "flag_embed_dim",
    "hidden_units",
    "layers",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "patience",
    "threshold",
    "use_gamma",
    "freeze_embeddings",
    "resample_noise",
    "beta",
    "format",
    "pred_field",
];

#[derive(Debug, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SegError::data(format!(
                    "{}:{}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(SegError::data(format!(
                    "{}:{}: unknown config key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    /// Flag value, else config value, else default.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(value) = flag {
            return Ok(value);
        }
        match self.map.get(key) {
            Some(raw) => raw.parse().map_err(|e| {
                SegError::data(format!("config key {key}={raw:?} is invalid: {e}"))
            }),
            None => Ok(default),
        }
    }

    /// Boolean switches: a set flag forces true; otherwise the config value.
    pub fn resolve_switch(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.resolve(key, None, false)
    }
}
