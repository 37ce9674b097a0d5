//! Flat `key = value` config files. Values land in the same slots as the
//! corresponding command-line flags, and explicit flags win over the file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{CliError, Result};

/// Keys a config file may set. Each matches the long flag it stands in for.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "output",
    "out",
    "data",
    "synth",
    "label-column",
    "one-hot",
    "delimiter",
    "subsample",
    "preset",
    "sigma",
    "kernel",
    "scheme",
    "k",
    "alpha",
    "draws",
    "n",
    "m-list",
    "repeats",
    "epsilon",
    "jitter",
    "train-fraction",
    "seeds",
    "count",
    "test-points",
];

/// Parsed config file: key to raw value string, keys validated against
/// [`KNOWN_KEYS`].
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(CliError::usage(format!(
                    "config line {} is not `key = value`: {raw:?}",
                    lineno + 1
                )));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "unknown config key {key:?} on line {}",
                    lineno + 1
                )));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::usage(format!(
                    "duplicate config key {key:?} on line {}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unlisted config key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present. The caller's flag value,
    /// when `Some`, should take precedence by never reaching this call.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::usage(format!("config key {key:?}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(other) => Err(CliError::usage(format!(
                "config key {key:?}: expected true or false, got {other:?}"
            ))),
        }
    }

    /// Comma-separated list of usize, for `m-list`.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|e| {
                        CliError::usage(format!("config key {key:?}: cannot parse {part:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_values() {
        let cfg = ConfigFile::parse(
            "# experiment defaults\n\nseed = 7\nscheme = kdpp # trailing comment\nk=25\n",
        )
        .unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get("scheme"), Some("kdpp"));
        assert_eq!(cfg.get_parsed::<usize>("k").unwrap(), Some(25));
        assert_eq!(cfg.get("alpha"), None);
    }

    #[test]
    fn value_may_contain_equals() {
        let cfg = ConfigFile::parse("delimiter = =\n").unwrap();
        assert_eq!(cfg.get("delimiter"), Some("="));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let err = ConfigFile::parse("bogus = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("bogus"));
        let err = ConfigFile::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let err = ConfigFile::parse("just a line\n").unwrap_err();
        assert!(err.to_string().contains("key = value"));
    }

    #[test]
    fn bools_and_lists() {
        let cfg = ConfigFile::parse("one-hot = true\nm-list = 1, 5,10\n").unwrap();
        assert_eq!(cfg.get_bool("one-hot").unwrap(), Some(true));
        assert_eq!(cfg.get_usize_list("m-list").unwrap(), Some(vec![1, 5, 10]));
        let bad = ConfigFile::parse("one-hot = yes\n").unwrap();
        assert!(bad.get_bool("one-hot").is_err());
    }
}
