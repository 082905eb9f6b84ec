//! `key = value` configuration files.
//!
//! Keys are the long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "lambda",
    "mu",
    "box-min",
    "box-max",
    "eta0",
    "sigma",
    "iters",
    "search-min",
    "search-max",
    "block-radius",
    "median-radius",
    "gt-scale",
    "scale",
    "tau",
    "threads",
    "color-max",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    path: PathBuf,
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), n + 1);
            };
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown key `{key}`", path.display(), n + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KEYS.contains(&key));
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<T>().map_err(|e| {
                    anyhow::anyhow!(
                        "{}: bad value `{raw}` for `{key}`: {e}",
                        self.path.display()
                    )
                })
            })
            .transpose()
    }

    /// Command-line value if given, otherwise the file value.
    pub fn pick<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

/// A search bound given either once for all axes (`-4`) or per axis as
/// `row,col` (`-2,-6`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisPair {
    pub row: i64,
    pub col: i64,
}

impl FromStr for AxisPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| format!("`{t}` is not an integer: {e}"))
        };
        match s.split_once(',') {
            Some((r, c)) => Ok(Self {
                row: parse(r)?,
                col: parse(c)?,
            }),
            None => {
                let v = parse(s)?;
                Ok(Self { row: v, col: v })
            }
        }
    }
}
