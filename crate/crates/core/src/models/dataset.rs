use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample of scalar observations.
///
/// Text form: one observation per line in decimal notation; blank lines and
/// anything after `#` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    observations: Vec<f64>,
}

impl DataSet {
    pub fn new(observations: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::invalid("data set is empty"));
        }
        if let Some(i) = observations.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "observation {} is not finite",
                i + 1
            )));
        }
        Ok(Self { observations })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// First `n` observations.
    pub fn prefix(&self, n: usize) -> Result<DataSet> {
        if n == 0 || n > self.n() {
            return Err(Error::invalid(format!(
                "prefix of length {n} from a data set of {}",
                self.n()
            )));
        }
        Ok(Self {
            observations: self.observations[..n].to_vec(),
        })
    }

    /// True when every observation is identical.
    pub fn is_constant(&self) -> bool {
        let first = self.observations[0];
        self.observations.iter().all(|&x| x == first)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut obs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let v: f64 = content.parse().map_err(|_| {
                Error::Parse(format!(
                    "line {}: cannot parse '{}' as a number",
                    lineno + 1,
                    content
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {}: observation '{}' is not finite",
                    lineno + 1,
                    content
                )));
            }
            obs.push(v);
        }
        if obs.is_empty() {
            return Err(Error::Parse("no observations found".into()));
        }
        Self::new(obs)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Renders the text form, optionally with a leading comment block.
    /// Values use the shortest representation that parses back exactly.
    pub fn render(&self, header: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        for x in &self.observations {
            let _ = writeln!(out, "{x}");
        }
        out
    }

    pub fn write(&self, path: &Path, header: Option<&str>) -> Result<()> {
        std::fs::write(path, self.render(header)).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
