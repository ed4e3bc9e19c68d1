//! `key = value` run-configuration files and flag/file/default
//! precedence.
//!
//! Every subcommand accepts `--config FILE`. A value is resolved as:
//! explicit flag beats config file beats built-in default. The resolver
//! records every value it hands out so the run manifest can snapshot
//! the exact effective configuration, and it rejects keys the command
//! never asked about, which turns typos into errors instead of
//! silently ignored settings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// Usage-level error: bad key, bad value, unreadable file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

pub struct Resolver {
    file: HashMap<String, String>,
    taken: HashMap<String, bool>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    /// Load a config file (or start empty when none is given).
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = HashMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", p.display())))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(ConfigError(format!(
                        "{}:{}: expected `key = value`, got `{raw}`",
                        p.display(),
                        lineno + 1
                    )));
                };
                let key = key.trim().to_string();
                if file
                    .insert(key.clone(), value.trim().to_string())
                    .is_some()
                {
                    return Err(ConfigError(format!(
                        "{}:{}: duplicate key `{key}`",
                        p.display(),
                        lineno + 1
                    )));
                }
            }
        }
        let taken = file.keys().map(|k| (k.clone(), false)).collect();
        Ok(Resolver {
            file,
            taken,
            resolved: BTreeMap::new(),
        })
    }

    /// Marks `key` as recognized by the current command so `finish` does
    /// not report it as unknown, even when a flag overrides the file.
    fn mark_seen(&mut self, key: &str) {
        if let Some(flag) = self.taken.get_mut(key) {
            *flag = true;
        }
    }

    fn file_value(&mut self, key: &str) -> Option<&str> {
        self.mark_seen(key);
        self.file.get(key).map(|s| s.as_str())
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn parse<T>(key: &str, raw: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        raw.parse()
            .map_err(|e| ConfigError(format!("bad value for `{key}`: `{raw}` ({e})")))
    }

    /// Flag beats file beats default.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.mark_seen(key);
        let value = match flag {
            Some(v) => v,
            None => match self.file_value(key) {
                Some(raw) => Self::parse(key, raw)?,
                None => default,
            },
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Like [`get`](Self::get), but with no default: the flag or the
    /// config file must supply it.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.mark_seen(key);
        let value = match flag {
            Some(v) => v,
            None => match self.file_value(key) {
                Some(raw) => Self::parse(key, raw)?,
                None => {
                    return Err(ConfigError(format!(
                        "missing required setting `--{key}` (flag or config key `{key}`)"
                    )))
                }
            },
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Optional setting with no default at all.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.mark_seen(key);
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_value(key) {
                Some(raw) => Some(Self::parse(key, raw)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    /// Raw string variant for values with custom parsers (layer lists,
    /// enums). Returns the resolved string after recording it.
    pub fn get_str(&mut self, key: &str, flag: Option<String>, default: &str) -> String {
        self.mark_seen(key);
        let value = match flag {
            Some(v) => v,
            None => self
                .file_value(key)
                .map(str::to_string)
                .unwrap_or_else(|| default.to_string()),
        };
        self.record(key, &value);
        value
    }

    /// Fails on config keys no resolver call ever consumed and returns
    /// the effective-configuration snapshot for the manifest.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        let mut unused: Vec<&str> = self
            .taken
            .iter()
            .filter(|(_, &used)| !used)
            .map(|(k, _)| k.as_str())
            .collect();
        if !unused.is_empty() {
            unused.sort_unstable();
            return Err(ConfigError(format!(
                "unknown config key(s) for this command: {}",
                unused.join(", ")
            )));
        }
        Ok(self.resolved)
    }
}

/// Comma-separated layer widths, e.g. `784,400,10`.
pub fn parse_layer_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    let dims: std::result::Result<Vec<usize>, _> =
        raw.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match dims {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(ConfigError(format!(
            "bad value for `{key}`: `{raw}` (expected comma-separated sizes like 784,400,10)"
        ))),
    }
}
