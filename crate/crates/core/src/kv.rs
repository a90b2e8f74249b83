//! Plain-text `key = value` files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys are unique.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }

    pub(crate) fn parse_lines<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line, raw) in lines {
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{text}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line, "empty key"));
            }
            if entries
                .insert(key.to_string(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::parse(line, format!("duplicate key `{key}`")));
            }
        }
        Ok(KeyValues { entries })
    }

    /// Removes and parses `key`, leaving `default` when absent.
    pub fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid value `{value}` for `{key}`"))),
        }
    }

    pub fn take_string(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    /// Splits off every entry whose key starts with `prefix.`, with the prefix stripped.
    pub fn take_prefixed(&mut self, prefix: &str) -> KeyValues {
        let tag = format!("{prefix}.");
        let keys: Vec<String> = self
            .entries
            .keys()
            .filter(|k| k.starts_with(&tag))
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for key in keys {
            let entry = self.entries.remove(&key).expect("key listed above");
            out.insert(key[tag.len()..].to_string(), entry);
        }
        KeyValues { entries: out }
    }

    /// Errors on the first key that nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::parse(line, format!("unknown key `{key}`"))),
        }
    }
}
