//! Flat `key = value` experiment configuration.
//!
//! Keys carry their unit in the name (`spacing_ghz`, `duration_s`). Later
//! sources override earlier ones: defaults, then the `--config` file, then
//! command-line flags. Every key that reaches a command must be consumed by
//! it; leftovers are reported as unknown. Keys under `out.` are outputs
//! written into manifests and are skipped on input, so a manifest can be fed
//! back as a config.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Display, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub const OUTPUT_PREFIX: &str = "out.";

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
}

#[derive(Debug, Default)]
pub struct Params {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
    /// Resolved values in the order they were read, for the manifest.
    resolved: RefCell<Vec<(String, String)>>,
}

impl Params {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut p = Params::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{source}:{}", n + 1);
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{origin}: expected `key = value`, got `{line}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(CliError::Config(format!("{origin}: invalid key `{k}`")));
            }
            if k.starts_with(OUTPUT_PREFIX) {
                continue;
            }
            if let Some(prev) = p.entries.get(k) {
                return Err(CliError::Config(format!(
                    "{origin}: key `{k}` already set at {}",
                    prev.origin
                )));
            }
            p.entries.insert(
                k.to_string(),
                Entry {
                    value: v.to_string(),
                    origin,
                },
            );
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Overrides `key` from a command-line flag.
    pub fn set(&mut self, key: &str, value: impl Display, flag: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin: flag.to_string(),
            },
        );
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>, flag: &str) {
        if let Some(v) = value {
            self.set(key, v, flag);
        }
    }

    /// `--set key=value` overrides.
    pub fn set_pairs(&mut self, pairs: &[String]) -> Result<(), CliError> {
        for p in pairs {
            let Some((k, v)) = p.split_once('=') else {
                return Err(CliError::Config(format!("--set: expected key=value, got `{p}`")));
            };
            self.set(k.trim(), v.trim(), "--set");
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key)
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().push((key.to_string(), value));
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        let v = match self.raw(key) {
            Some(e) => e.value.parse::<T>().map_err(|_| {
                CliError::Config(format!("{}: key `{key}`: cannot parse `{}`", e.origin, e.value))
            })?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Optional key with no default; absent keys are not written to manifests.
    pub fn get_opt<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
    {
        match self.raw(key) {
            Some(e) => {
                let v = e.value.parse::<T>().map_err(|_| {
                    CliError::Config(format!("{}: key `{key}`: cannot parse `{}`", e.origin, e.value))
                })?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    /// A key restricted to a fixed set of words.
    pub fn choice(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String, CliError> {
        let v: String = match self.raw(key) {
            Some(e) => {
                if !allowed.contains(&e.value.as_str()) {
                    return Err(CliError::Config(format!(
                        "{}: key `{key}`: `{}` is not one of {}",
                        e.origin,
                        e.value,
                        allowed.join(", ")
                    )));
                }
                e.value.clone()
            }
            None => default.to_string(),
        };
        self.record(key, v.clone());
        Ok(v)
    }

    /// Fails on keys the command never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, e)| format!("`{k}` ({})", e.origin))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }

    /// Resolved settings as `key = value` lines.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.resolved.borrow().iter() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Manifest: resolved settings followed by `out.` results.
#[derive(Debug, Default)]
pub struct Manifest {
    outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn put(&mut self, key: &str, value: impl Display) {
        self.outputs.push((format!("{OUTPUT_PREFIX}{key}"), value.to_string()));
    }

    pub fn render(&self, params: &Params) -> String {
        let mut s = params.resolved_text();
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn outputs_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_outputs() {
        let p = Params::parse("# c\n\nmu = 0.5\nout.g2 = 4\n", "t").unwrap();
        assert_eq!(p.get("mu", 0.1).unwrap(), 0.5);
        p.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_reported_with_their_line() {
        let p = Params::parse("mu = 0.5\nspacing = 6\n", "cfg").unwrap();
        p.get("mu", 0.1).unwrap();
        let e = p.finish().unwrap_err().to_string();
        assert!(e.contains("spacing") && e.contains("cfg:2"), "{e}");
    }

    #[test]
    fn malformed_lines_and_values_fail() {
        assert!(Params::parse("mu 0.5", "t").is_err());
        assert!(Params::parse("a = 1\na = 2", "t").is_err());
        let p = Params::parse("mu = abc", "t").unwrap();
        assert!(p.get("mu", 0.1).is_err());
        let p = Params::parse("pairs = diag", "t").unwrap();
        assert!(p.choice("pairs", "block", &["block", "table"]).is_err());
    }

    #[test]
    fn flags_override_files() {
        let mut p = Params::parse("mu = 0.5", "t").unwrap();
        p.set("mu", 2.0, "--mu");
        assert_eq!(p.get("mu", 0.1).unwrap(), 2.0);
        assert_eq!(p.resolved_text(), "mu = 2\n");
    }
}
