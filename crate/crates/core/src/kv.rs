//! Plain-text `key = value` files with dotted keys for nesting.
//!
//! Lines starting with `#` and blank lines are ignored. Keys keep their file
//! order. Floats are written with `{:e}`, the shortest representation that
//! parses back to the same `f64`.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format!("{value:e}"));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("missing key `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|e| Error::Format(format!("key `{key}`: cannot parse `{raw}`: {e}")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None | Some("none") => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", n + 1)))?;
            kv.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        let text = format!("# {header}\n{}", self.to_text());
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KeyValues::from_text(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn join_f64(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&format!("{v:e}"));
    }
    s
}

pub(crate) fn split_f64(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Format(format!("key `{key}`: bad number `{t}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let kv = KeyValues::from_text("# hi\n\na.b = 3\nname = x = y\n").unwrap();
        assert_eq!(kv.parse::<u32>("a.b").unwrap(), 3);
        assert_eq!(kv.get("name"), Some("x = y"));
        assert!(kv.require("missing").is_err());
        assert!(KeyValues::from_text("novalue\n").is_err());
    }

    #[test]
    fn floats_round_trip() {
        let vals = [0.1, -1e-300, 1.0 / 3.0, f64::MAX, 5e-324, 0.0, -0.0];
        let back = split_f64("w", &join_f64(&vals)).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
