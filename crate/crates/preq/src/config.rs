//! Flat key=value configuration files.
//!
//! A config file supplies defaults for flags the user did not pass;
//! explicit flags always win. Keys are the long flag names, one per line,
//! `#` starts a comment:
//!
//! ```text
//! beta = 0.95
//! reps = 100000
//! seed = 7
//! ```

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct Defaults {
    values: HashMap<String, String>,
}

impl Defaults {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::runtime(format!("reading config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::validation(format!(
                    "config {} line {}: expected key=value, got {raw:?}",
                    path.display(),
                    idx + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Defaults { values })
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Failure::validation(format!("config key {key}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    /// Flag value if given, else config value, else the built-in default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, fallback: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.parsed(key)?.unwrap_or(fallback)),
        }
    }

    /// Like [`Defaults::resolve`] but with no built-in default: the value
    /// must come from the flag or the config file.
    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => self.parsed(key)?.ok_or_else(|| {
                Failure::validation(format!("--{key} is required (flag or config file)"))
            }),
        }
    }
}
