//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique;
//! values are trimmed and may not be empty.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key {key}: cannot parse {value:?}: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<FlatConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key = value, found {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(syntax("empty key or value".into()));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(syntax(format!("duplicate key {k:?}")));
            }
        }
        Ok(FlatConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FlatConfig, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` into `slot` if present.
    pub fn apply<T>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = self.entries.get(key) {
            *slot = v.parse().map_err(|e: T::Err| ConfigError::Value {
                key: key.to_string(),
                value: v.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Fails on the first key not in `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    /// Canonical text form, sorted by key.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies() {
        let c = FlatConfig::parse("# c\nepochs = 12\n\nlr=0.01\n").unwrap();
        let mut epochs = 0usize;
        let mut lr = 0.0f64;
        c.apply("epochs", &mut epochs).unwrap();
        c.apply("lr", &mut lr).unwrap();
        c.apply("absent", &mut lr).unwrap();
        assert_eq!((epochs, lr), (12, 0.01));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            FlatConfig::parse("a\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(FlatConfig::parse("a=1\na=2\n").is_err());
        let c = FlatConfig::parse("epochs = x").unwrap();
        let mut e = 0usize;
        assert!(matches!(c.apply("epochs", &mut e), Err(ConfigError::Value { .. })));
        assert!(matches!(c.check_keys(&["lr"]), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn render_round_trips() {
        let c = FlatConfig::parse("b = 2\na = 1\n").unwrap();
        assert_eq!(FlatConfig::parse(&c.render()).unwrap(), c);
    }
}
