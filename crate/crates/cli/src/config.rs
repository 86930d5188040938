//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aftnet::{Error, Result};

/// Environment variable naming the directory that relative dataset paths
/// are resolved against.
pub const DATA_ROOT_ENV: &str = "AFTNET_DATA_ROOT";

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn new(allowed: &'static [&'static str]) -> Self {
        Self {
            values: BTreeMap::new(),
            allowed,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Dashes in keys are
    /// read as underscores.
    pub fn parse_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return config_error(format!("line {}: expected key = value, got {:?}", i + 1, raw));
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        self.parse_text(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        let key = key.replace('-', "_");
        if !self.allowed.contains(&key.as_str()) {
            return config_error(format!("unknown setting {:?} (expected one of {})", key, self.allowed.join(", ")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn set_opt<V: Display>(&mut self, key: &str, value: Option<V>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    /// Applies `key=value` override strings.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                return config_error(format!("override {:?} is not key=value", o));
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("{} = {:?}: {}", key, v, e))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing required setting {:?}", key)))
    }

    pub fn positive(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.get_or(key, default)?;
        if v == 0 {
            return config_error(format!("{} must be positive", key));
        }
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => config_error(format!("{} = {:?} is not a boolean", key, v)),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|e| Error::Config(format!("{} entry {:?}: {}", key, s, e))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// A dataset path; relative paths go under the data root when one is set.
    pub fn data_path(&self, key: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.require::<String>(key)?);
        Ok(match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if p.is_relative() => PathBuf::from(root).join(p),
            _ => p,
        })
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require::<String>(key)?))
    }

    /// Settings as a JSON object, for run manifests.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.values.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["epochs", "lr0", "widths", "dc"];

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::new(KEYS);
        c.parse_text("# run\nepochs = 10\nlr0=0.01  # fast\n").unwrap();
        c.apply_overrides(&["epochs=3".into()]).unwrap();
        assert_eq!(c.require::<usize>("epochs").unwrap(), 3);
        assert_eq!(c.require::<f64>("lr0").unwrap(), 0.01);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut c = RunConfig::new(KEYS);
        assert!(c.parse_text("nope = 1").is_err());
        assert!(c.parse_text("epochs").is_err());
        c.set("epochs", "ten").unwrap();
        assert!(matches!(c.get::<usize>("epochs"), Err(Error::Config(_))));
        c.set("dc", "maybe").unwrap();
        assert!(c.bool_or("dc", true).is_err());
    }

    #[test]
    fn lists_and_dashes() {
        let mut c = RunConfig::new(KEYS);
        c.apply_overrides(&["widths=4, 8,16".into()]).unwrap();
        assert_eq!(c.list::<usize>("widths").unwrap().unwrap(), vec![4, 8, 16]);
        let mut c = RunConfig::new(&["lr_min"]);
        c.set("lr-min", 1e-5).unwrap();
        assert_eq!(c.require::<f64>("lr_min").unwrap(), 1e-5);
    }
}
