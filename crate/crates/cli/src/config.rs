//! Flat `key = value` config files with `[section]` headers.
//!
//! Keys before the first header live in the unnamed section `""`. Lines
//! starting with `#` or `;` are comments. Every key must be consumed by the
//! reader; leftovers are reported so typos do not pass silently.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| HarnessError::config(lineno, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(HarnessError::config(lineno, "empty section name"));
                }
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(lineno, format!("expected `key = value`, got {line:?}")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(HarnessError::config(lineno, "empty key"));
            }
            let value = v.split(" #").next().unwrap_or("").trim().to_string();
            if sections.entry(current.clone()).or_default().insert(key.to_string(), value).is_some() {
                return Err(HarnessError::config(lineno, format!("duplicate key {key:?} in [{current}]")));
            }
        }
        Ok(Self {
            sections,
            used: RefCell::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::MissingFile {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        let v = self.sections.get(section)?.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(v)
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(section, key)
            .map(|v| {
                v.parse::<T>().map_err(|e| HarnessError::Value {
                    key: qualified(section, key),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| HarnessError::Value {
                    key: qualified(section, key),
                    value: s.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Keys that were never read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.sections
            .iter()
            .flat_map(|(s, kv)| kv.keys().map(move |k| (s.clone(), k.clone())))
            .filter(|sk| !used.contains(sk))
            .map(|(s, k)| qualified(&s, &k))
            .collect()
    }

    pub fn reject_unused(&self) -> Result<()> {
        let unused = self.unused();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::UnknownKeys(unused.join(", ")))
        }
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_lists() {
        let cfg = ConfigFile::parse(
            "kind = overall\n# comment\nseeds = 1, 2,3\n\n[train]\nepochs = 4 # trailing\n[train.visrec]\nlambda=0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.raw("", "kind"), Some("overall"));
        assert_eq!(cfg.list::<u64>("", "seeds").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(cfg.get::<usize>("train", "epochs").unwrap(), Some(4));
        assert!(cfg.unused().contains(&"train.visrec.lambda".to_string()));
        assert_eq!(cfg.get::<f64>("train.visrec", "lambda").unwrap(), Some(0.5));
        cfg.reject_unused().unwrap();
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = ConfigFile::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ConfigFile::parse("[open\n").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2\n").is_err());
        let cfg = ConfigFile::parse("n = abc\n").unwrap();
        assert!(cfg.get::<usize>("", "n").unwrap_err().to_string().contains("abc"));
    }
}
