//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    BiasTable,
    Codelength,
    Simulate,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::BiasTable => "bias-table",
            Command::Codelength => "codelength",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }

    pub fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            Command::Fit => &["model", "prior", "prior_scale", "data", "format", "out"],
            Command::BiasTable => &["k_grid", "lambda_grid", "n_grid", "format", "out"],
            Command::Codelength => &[
                "model", "prior", "prior_scale", "data", "theta", "units", "gap_ns", "format", "out",
            ],
            Command::Simulate => &[
                "model", "prior", "prior_scale", "theta", "n", "replicates", "seed", "threads", "outputs",
                "study", "n_grid", "format", "out",
            ],
            Command::Verify => &["seed", "fast", "criteria", "threads", "format", "out"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            values: BTreeMap::new(),
        }
    }

    /// Sets `key`, rejecting keys the command does not accept.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !self.command.allowed_keys().contains(&key) {
            return Err(Error::invalid(format!(
                "unknown key '{key}' for '{}' (accepted: {})",
                self.command.name(),
                self.command.allowed_keys().join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `key=value` text, one assignment per line; `#` starts a
    /// comment. `origin` prefixes error messages.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| Error::Parse(format!("{origin} line {}: {}", i + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        match assignment.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => self.set(k, v),
            _ => Err(Error::Parse(format!("expected key=value, got '{assignment}'"))),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::invalid(format!("'{}' requires field '{key}'", self.command.name()))
        })
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(v) => parse_field(key, v),
            None => Ok(default),
        }
    }

    pub fn parse_required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        parse_field(key, self.require(key)?)
    }

    pub fn list_or<T: std::str::FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>> {
        parse_list(key, self.get(key).unwrap_or(default))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::invalid(format!("field '{key}': expected true or false, got '{v}'"))),
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Parse(m) => m,
        other => other.to_string(),
    }
}

pub fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("field '{key}': cannot parse '{value}'")))
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_field(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("field '{key}' is empty")));
    }
    Ok(items)
}
