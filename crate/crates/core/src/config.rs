//! Flat `key = value` configuration text, shared by the weights file header
//! and on-disk config files.
//!
//! Grammar: one pair per line, `#` starts a comment, blank lines are ignored.
//! Keys must be unique. No sections, no quoting, no escapes.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses config text into a key -> value map, rejecting duplicate keys and
/// lines without `=`.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

/// Renders pairs as config text, one `key = value` per line.
pub fn format_kv<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    }
    out
}

/// Removes and parses `key`, falling back to `default` when absent.
pub fn take_or<T: FromStr>(
    map: &mut BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match map.remove(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`"))),
    }
}

/// Removes and parses a required `key`.
pub fn take_required<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map
        .remove(key)
        .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
}

/// Errors if any keys are left over after the caller consumed what it knows.
pub fn reject_unknown(map: &BTreeMap<String, String>, context: &str) -> Result<()> {
    if let Some(key) = map.keys().next() {
        return Err(Error::Config(format!("unknown key `{key}` in {context}")));
    }
    Ok(())
}

/// Parses a comma-separated list of values, e.g. `16,32,64`.
pub fn parse_list<T: FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{}`", item.trim())))
        })
        .collect()
}

/// Renders a list back to the comma-separated form accepted by `parse_list`.
pub fn format_list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|item| item.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
