//! Flat key=value experiment configuration. Values come from an optional
//! config file with command-line flags taking precedence; every key the
//! experiment does not consume is rejected. The resolved values (after
//! defaults) are what the manifest records, so a manifest can be passed
//! back as the config file to reproduce a run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// A configuration problem: unreadable file, malformed line, unknown or
/// unparsable key, violated precondition. Mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Key=value store for one experiment run.
pub struct Params {
    experiment: &'static str,
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Params {
    /// Load the config file if given. A file whose first non-blank byte
    /// is `{` is read as a run manifest: its embedded resolved config is
    /// extracted, and its experiment name must match.
    pub fn load(experiment: &'static str, path: Option<&Path>) -> anyhow::Result<Params> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
            if text.trim_start().starts_with('{') {
                file = manifest_config(experiment, &text)?;
            } else {
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (key, value) = line.split_once('=').ok_or_else(|| {
                        bad(format!(
                            "{}:{}: expected key=value, got {line:?}",
                            path.display(),
                            lineno + 1
                        ))
                    })?;
                    let key = key.trim().to_string();
                    if file.insert(key.clone(), value.trim().to_string()).is_some() {
                        return Err(bad(format!("duplicate config key {key:?}")));
                    }
                }
            }
        }
        Ok(Params {
            experiment,
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn record(&mut self, key: &str, shown: String) {
        self.resolved.insert(key.to_string(), shown);
    }

    /// Take the file's value for `key`, parsed. A command-line override
    /// still consumes the key, so `finish` never flags it as unknown.
    fn file_value<T: FromStr>(&mut self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| bad(format!("key {key}: cannot parse {raw:?}: {e}"))),
        }
    }

    /// Resolve one value: command line beats the file beats the default.
    pub fn get<T>(&mut self, key: &str, cli: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let from_file = self.file_value(key)?;
        let value = cli.or(from_file).unwrap_or(default);
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Resolve a value that has no default.
    pub fn require<T>(&mut self, key: &str, cli: Option<T>) -> anyhow::Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let from_file = self.file_value(key)?;
        let value = cli
            .or(from_file)
            .ok_or_else(|| bad(format!("missing required key {key}")))?;
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Resolve an optional value (no default; absent stays absent).
    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let from_file = self.file_value(key)?;
        let value = cli.or(from_file);
        if let Some(v) = &value {
            self.record(key, v.to_string());
        }
        Ok(value)
    }

    /// Resolve a boolean switch: a bare command-line flag turns it on,
    /// the file may say true/false.
    pub fn flag(&mut self, key: &str, cli: bool) -> anyhow::Result<bool> {
        let from_file = self.file_value(key)?;
        let value = cli || from_file.unwrap_or(false);
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Resolve a comma-separated list.
    pub fn get_list<T>(&mut self, key: &str, cli: Option<String>, default: &str) -> anyhow::Result<Vec<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let from_file = self.file.remove(key);
        let raw = cli.or(from_file).unwrap_or_else(|| default.to_string());
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(
                part.parse()
                    .map_err(|e| bad(format!("key {key}: cannot parse {part:?}: {e}")))?,
            );
        }
        if out.is_empty() {
            return Err(bad(format!("key {key}: empty list")));
        }
        self.record(key, raw.split(',').map(str::trim).collect::<Vec<_>>().join(","));
        Ok(out)
    }

    /// Reject leftover keys and freeze the resolved configuration.
    pub fn finish(self) -> anyhow::Result<Resolved> {
        if let Some(key) = self.file.keys().next() {
            return Err(bad(format!(
                "unknown key {key:?} for experiment {}",
                self.experiment
            )));
        }
        Ok(Resolved {
            experiment: self.experiment,
            values: self.resolved,
        })
    }
}

fn manifest_config(
    experiment: &str,
    text: &str,
) -> anyhow::Result<BTreeMap<String, String>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| bad(format!("malformed manifest: {e}")))?;
    match value.get("experiment").and_then(|v| v.as_str()) {
        Some(name) if name == experiment => {}
        Some(name) => {
            return Err(bad(format!(
                "manifest records experiment {name:?}, not {experiment:?}"
            )))
        }
        None => return Err(bad("manifest lacks an experiment name")),
    }
    let config = value
        .get("config")
        .and_then(|v| v.as_object())
        .ok_or_else(|| bad("manifest lacks a config object"))?;
    let mut map = BTreeMap::new();
    for (k, v) in config {
        let s = v
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| bad(format!("manifest config key {k} is not a string")))?;
        map.insert(k.clone(), s);
    }
    Ok(map)
}

/// The fully resolved configuration of a run.
#[derive(Debug)]
pub struct Resolved {
    pub experiment: &'static str,
    pub values: BTreeMap<String, String>,
}

impl Resolved {
    /// Hash of the canonical key=value listing.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.values {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        format!("{:x}", hasher.finalize())
    }
}
