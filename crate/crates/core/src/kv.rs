//! Line-oriented `[section]` / `key = value` text format shared by SCM files,
//! POMDP files and experiment configs.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! lhs -> rhs          # table row (any line containing `->`)
//! ```
//!
//! Sections may repeat; their order is preserved. Every item remembers its
//! 1-based source line so that consumers can report precise errors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub lhs: String,
    pub rhs: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
    pub rows: Vec<Row>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| Error::Parse { line: self.line, msg: format!("section [{}] is missing `{key}`", self.name) })
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(Error::Parse { line: e.line, msg: format!("unknown key `{}` in section [{}]", e.key, self.name) });
            }
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse { line, msg: "unterminated section header".into() })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Parse { line, msg: "empty section name".into() });
            }
            sections.push(Section { name: name.to_string(), line, entries: vec![], rows: vec![] });
            continue;
        }
        let section =
            sections.last_mut().ok_or_else(|| Error::Parse { line, msg: "content before the first [section] header".into() })?;
        if let Some((lhs, rhs)) = content.split_once("->") {
            section.rows.push(Row { lhs: lhs.trim().to_string(), rhs: rhs.trim().to_string(), line });
        } else if let Some((k, v)) = content.split_once('=') {
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse { line, msg: format!("malformed key `{key}`") });
            }
            if section.get(key).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
            }
            section.entries.push(Entry { key: key.to_string(), value: v.trim().to_string(), line });
        } else {
            return Err(Error::Parse { line, msg: format!("expected `key = value` or a table row, got `{content}`") });
        }
    }
    Ok(sections)
}

/// Splits a comma-separated list, trimming items; the empty string is the empty list.
pub fn list(value: &str) -> Vec<String> {
    if value.trim().is_empty() {
        return vec![];
    }
    value.split(',').map(|s| s.trim().to_string()).collect()
}

pub fn parse_f64_list(value: &str, line: usize) -> Result<Vec<f64>> {
    list(value)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("`{s}` is not a number") }))
        .collect()
}

/// Parses `key=value` pairs separated by whitespace, where a value may be a
/// parenthesised comma list: `parents=(a1, b0) noise=u1`.
pub fn row_fields(lhs: &str, line: usize) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut rest = lhs.trim();
    while !rest.is_empty() {
        let (key, after) = rest
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected `key=value` in row, got `{rest}`") })?;
        let after = after.trim_start();
        let (value, tail) = if let Some(inner) = after.strip_prefix('(') {
            let close = inner.find(')').ok_or_else(|| Error::Parse { line, msg: "unclosed `(`".into() })?;
            (inner[..close].to_string(), &inner[close + 1..])
        } else {
            match after.find(char::is_whitespace) {
                Some(p) => (after[..p].to_string(), &after[p..]),
                None => (after.to_string(), ""),
            }
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
        rest = tail.trim_start();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_entries_and_rows() {
        let text = "# header\n[node]\nname = A\ndomain = a1, a2\n\n[mechanism]\nnode = O\nparents=(a1) noise=0 -> 1 # trailing\n";
        let s = parse(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].require("domain").unwrap().value, "a1, a2");
        assert_eq!(s[1].rows[0].lhs, "parents=(a1) noise=0");
        assert_eq!(s[1].rows[0].rhs, "1");
        assert_eq!(s[1].rows[0].line, 8);
    }

    #[test]
    fn unknown_key_reports_line() {
        let s = parse("[a]\nx = 1\ny = 2\n").unwrap();
        let err = s[0].check_keys(&["x"]).unwrap_err();
        assert_eq!(err, Error::Parse { line: 3, msg: "unknown key `y` in section [a]".into() });
    }

    #[test]
    fn row_fields_with_tuples() {
        let f = row_fields("parents=(a1, b2) noise=u", 1).unwrap();
        assert_eq!(f, vec![("parents".into(), "a1, b2".into()), ("noise".into(), "u".into())]);
        assert_eq!(row_fields("parents=() noise=0", 1).unwrap()[0].1, "");
    }

    #[test]
    fn rejects_orphan_content() {
        assert!(parse("x = 1\n").is_err());
        assert!(parse("[a]\njunk\n").is_err());
    }
}
