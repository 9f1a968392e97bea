//! Flat `key=value` configuration files.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! ignored; whitespace around keys and values is trimmed.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(i + 1, "empty key"));
            }
            if values.insert(k.to_owned(), v.trim().to_owned()).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate key {k:?}")));
            }
        }
        Ok(KeyValues { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_owned(), value.to_string());
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}={v:?}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }

    /// The keys starting with `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> KeyValues {
        let values = self
            .values
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix(prefix)?.to_owned(), v.clone())))
            .collect();
        KeyValues { values }
    }

    pub fn to_text(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_defaults() {
        let kv = KeyValues::parse("# comment\nhidden_dim = 32\n\nname=x=y\n").unwrap();
        assert_eq!(kv.get_or("hidden_dim", 0usize).unwrap(), 32);
        assert_eq!(kv.get_or("embed_dim", 7usize).unwrap(), 7);
        assert_eq!(kv.get("name"), Some("x=y"));
        assert!(kv.get_or::<usize>("name", 0).is_err());
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
        assert!(kv.reject_unknown(&["hidden_dim", "name"]).is_ok());
        assert!(kv.reject_unknown(&["hidden_dim"]).is_err());
        let nested = KeyValues::parse("synth.n_stems=5\nseeds=1\n")
            .unwrap()
            .strip_prefix("synth.");
        assert_eq!(nested.keys().collect::<Vec<_>>(), vec!["n_stems"]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            KeyValues::parse("a=1\nnope\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(KeyValues::parse("a=1\na=2\n").is_err());
    }
}
