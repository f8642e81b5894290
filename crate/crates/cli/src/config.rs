//! Optional `key = value` defaults file.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use fpmpc::{Error, Result};

#[derive(Debug, Default)]
pub struct Defaults {
    values: HashMap<String, String>,
}

impl Defaults {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Defaults::default());
        };
        Defaults::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                line: Some(i + 1),
                message: format!("expected key = value, got {line:?}"),
            })?;
            let v = v.trim().trim_matches('"');
            values.insert(k.trim().replace('_', "-"), v.to_string());
        }
        Ok(Defaults { values })
    }

    /// The flag value if given, else the file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidArgument(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Seed from the flag, the file, then `FPMPC_SEED`, then 0.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = self.pick(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var("FPMPC_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("FPMPC_SEED={v:?} is not an integer"))),
            Err(_) => Ok(0),
        }
    }
}
