//! Flat `key = value` configuration files with `[section]` headers.
//!
//! See `docs/config-format.md` for the grammar.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line, 0 for entries set programmatically.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigDoc {
    sections: Vec<(String, Vec<Entry>)>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = ConfigDoc::default();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line_no, "section header missing `]`"))?
                    .trim();
                if !is_ident(name) {
                    return Err(ConfigError::at(line_no, format!("invalid section name `{name}`")));
                }
                if doc.sections.iter().any(|(n, _)| n == name) {
                    return Err(ConfigError::at(line_no, format!("duplicate section `[{name}]`")));
                }
                doc.sections.push((name.to_string(), Vec::new()));
                current = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line_no, "expected `key = value`"))?;
            let key = key.trim();
            if !is_ident(key) {
                return Err(ConfigError::at(line_no, format!("invalid key `{key}`")));
            }
            if doc.get(&current, key).is_some() {
                return Err(ConfigError::at(line_no, format!("duplicate key `{key}`")));
            }
            doc.section_mut(&current).push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(doc)
    }

    fn section_mut(&mut self, name: &str) -> &mut Vec<Entry> {
        if let Some(i) = self.sections.iter().position(|(n, _)| n == name) {
            return &mut self.sections[i].1;
        }
        self.sections.push((name.to_string(), Vec::new()));
        &mut self.sections.last_mut().expect("just pushed").1
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections
            .iter()
            .find(|(n, _)| n == section)
            .and_then(|(_, entries)| entries.iter().find(|e| e.key == key))
    }

    /// Inserts or replaces a value.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        let entries = self.section_mut(section);
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::new(format!("override `{spec}` is not `section.key=value`")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError::new(format!("override key `{path}` lacks a section")))?;
        if !is_ident(section) || !is_ident(key) {
            return Err(ConfigError::new(format!("invalid override key `{path}`")));
        }
        self.set(section, key, value.trim());
        Ok(())
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &[Entry])> {
        self.sections.iter().map(|(n, e)| (n.as_str(), e.as_slice()))
    }

    /// Parses a scalar value if present.
    pub fn value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| ConfigError::at(e.line, format!("[{section}] {key}: {err}"))),
        }
    }

    /// Parses a comma-separated list if present.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|err| ConfigError::at(e.line, format!("[{section}] {key}: `{s}`: {err}"))))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    /// Rejects keys outside `allowed` for every section listed there, and
    /// sections that are not listed at all.
    pub fn check_keys(&self, allowed: &[(&str, &[&str])]) -> Result<(), ConfigError> {
        for (name, entries) in &self.sections {
            let Some((_, keys)) = allowed.iter().find(|(s, _)| s == name) else {
                let line = entries.first().map_or(0, |e| e.line);
                return Err(ConfigError::at(line, format!("unknown section `[{name}]`")));
            };
            if let Some(e) = entries.iter().find(|e| !keys.contains(&e.key.as_str())) {
                return Err(ConfigError::at(e.line, format!("unknown key `{}` in [{name}]", e.key)));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if entries.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            if !name.is_empty() {
                let _ = writeln!(out, "[{name}]");
            }
            for e in entries {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            }
        }
        out
    }
}

/// `true/false`, `yes/no`, `on/off`, `1/0`.
pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flag(pub bool);

impl FromStr for Flag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bool(s).map(Flag)
    }
}
