//! Flat `key = value` config files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::Result;

use crate::UsageError;

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; keys may use `-` or `_`.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError::new(format!("config line {}: expected key = value", i + 1)).into());
        };
        let key = normalize(k.trim());
        if key.is_empty() {
            return Err(UsageError::new(format!("config line {}: empty key", i + 1)).into());
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(UsageError::new(format!("config line {}: duplicate key {key}", i + 1)).into());
        }
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

/// Resolves parameters as flag, then config file, then default, and records
/// every resolved value for the manifest.
#[derive(Debug, Default)]
pub struct Params {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Params {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => BTreeMap::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError::new(format!("cannot read config {}: {e}", p.display())))?;
                parse_file(&text)?
            }
        };
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError::new(format!("config key {key}: invalid value {v:?}: {e}")).into()),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Like [`Params::get`] without a default; absent values are recorded as
    /// `auto`.
    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        self.resolved
            .insert(key.to_string(), v.as_ref().map_or("auto".to_string(), |v| v.to_string()));
        Ok(v)
    }

    /// A string parameter restricted to `choices`.
    pub fn choice(&mut self, key: &str, flag: Option<String>, default: &str, choices: &[&str]) -> Result<String> {
        let v = self.get(key, flag, default.to_string())?;
        if !choices.contains(&v.as_str()) {
            return Err(UsageError::new(format!(
                "{key}: expected one of {}, got {v:?}",
                choices.join(", ")
            ))
            .into());
        }
        Ok(v)
    }

    /// Fails on config keys outside `known`; returns known keys this run did
    /// not consume.
    pub fn finish(&self, known: &[&str]) -> Result<Vec<String>> {
        let (unknown, unused): (Vec<&String>, Vec<&String>) = self
            .file
            .keys()
            .filter(|k| !self.resolved.contains_key(*k))
            .partition(|k| !known.contains(&k.as_str()));
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|k| k.as_str()).collect();
            return Err(UsageError::new(format!("unknown config keys: {}", names.join(", "))).into());
        }
        Ok(unused.into_iter().cloned().collect())
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// `a-b`, `a..=b`, `a,b,c` or a single value.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || UsageError::new(format!("k: cannot parse {s:?}"));
    let s = s.trim();
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..=").or_else(|| s.split_once('-')) {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(UsageError::new("k: values must be at least 1".to_string()).into());
    }
    Ok(ks)
}
