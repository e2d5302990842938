//! Run configuration files. The grammar is documented in `docs/config.md`.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;

use crate::error::CliError;

/// Keys accepted outside any section.
pub const GLOBAL_KEYS: [&str; 3] = ["seed", "threads", "out"];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    /// 1-based line in the config file; 0 for command-line values.
    pub line: usize,
}

/// Parsed file: global entries plus one map per section, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: IndexMap<String, Entry>,
    pub sections: IndexMap<String, IndexMap<String, Entry>>,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2
        && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\'')))
    {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ConfigFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            let bad = |reason: &str| CliError::ConfigSyntax {
                line,
                text: raw.to_string(),
                reason: reason.to_string(),
            };
            if let Some(rest) = t.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| bad("section header must end with `]`"))?
                    .trim();
                if !valid_name(name) {
                    return Err(bad("section names use letters, digits and `_`"));
                }
                cfg.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| bad("expected `key = value`"))?;
            let key = key.trim();
            let entry = Entry {
                value: unquote(value).to_string(),
                line,
            };
            let (section, name) = match key.split_once('.') {
                Some((s, k)) => (Some(s.trim().to_string()), k.trim()),
                None => (current.clone(), key),
            };
            if !valid_name(name) || section.as_deref().is_some_and(|s| !valid_name(s)) {
                return Err(bad("keys use letters, digits and `_`"));
            }
            let map = match section {
                Some(s) => cfg.sections.entry(s).or_default(),
                None => &mut cfg.global,
            };
            if map.insert(name.to_string(), entry).is_some() {
                return Err(bad("key set twice"));
            }
        }
        for key in cfg.global.keys() {
            if !GLOBAL_KEYS.contains(&key.as_str()) {
                return Err(CliError::UnknownKey(key.clone()));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(Self::parse(&text)?)
    }

    /// Rejects sections that no subcommand reads.
    pub fn check_sections(&self, known: &[&str]) -> Result<(), CliError> {
        for name in self.sections.keys() {
            if !known.contains(&name.as_str()) {
                return Err(CliError::UnknownSection(name.clone()));
            }
        }
        Ok(())
    }
}

/// Settings for one subcommand: its config section overlaid with
/// command-line values.
#[derive(Debug, Clone)]
pub struct Params {
    section: String,
    entries: IndexMap<String, Entry>,
}

impl Params {
    /// Merges `file[section]` with `overrides` (which win) and rejects any
    /// key outside `allowed`.
    pub fn new(
        section: &str,
        file: Option<&ConfigFile>,
        overrides: &[(String, String)],
        allowed: &[&str],
    ) -> Result<Self, CliError> {
        let mut entries = file
            .and_then(|f| f.sections.get(section))
            .cloned()
            .unwrap_or_default();
        for (k, v) in overrides {
            entries.insert(
                k.clone(),
                Entry {
                    value: v.clone(),
                    line: 0,
                },
            );
        }
        for key in entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::UnknownKey(format!("{section}.{key}")));
            }
        }
        Ok(Self {
            section: section.to_string(),
            entries,
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn invalid(&self, key: &str, e: &Entry, reason: impl Display) -> CliError {
        CliError::InvalidValue {
            key: format!("{}.{key}", self.section),
            value: e.value.clone(),
            reason: reason.to_string(),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .trim()
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.invalid(key, e, err)),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::MissingKey(format!("{}.{key}", self.section)))
    }

    /// Lower-cased string restricted to `choices`.
    pub fn choice(&self, key: &str, choices: &[&str], default: &str) -> Result<String, CliError> {
        match self.entries.get(key) {
            None => Ok(default.to_string()),
            Some(e) => {
                let v = e.value.trim().to_ascii_lowercase();
                if choices.contains(&v.as_str()) {
                    Ok(v)
                } else {
                    Err(self.invalid(key, e, format!("expected one of {}", choices.join(", "))))
                }
            }
        }
    }

    /// Comma-separated list; empty text gives an empty list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|err| self.invalid(key, e, err)))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    /// Real number that also accepts `inf`, `none` and `off` (all meaning
    /// no value).
    pub fn optional_real(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => match e.value.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "none" | "off" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|err| self.invalid(key, e, err)),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# pipeline
seed = 7
[synth]
height = 16
snr_db = inf
reduce.k = 3

[reduce]
method = \"pca\"
";

    #[test]
    fn sections_and_flat_keys() {
        let c = ConfigFile::parse(SAMPLE).unwrap();
        assert_eq!(c.global["seed"].value, "7");
        assert_eq!(c.sections["synth"]["height"].line, 4);
        assert_eq!(c.sections["reduce"]["k"].value, "3");
        assert_eq!(c.sections["reduce"]["method"].value, "pca");
    }

    #[test]
    fn syntax_errors_name_the_line() {
        match ConfigFile::parse("[synth]\nheight 16\n") {
            Err(CliError::ConfigSyntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ConfigFile::parse("[oops\n"),
            Err(CliError::ConfigSyntax { line: 1, .. })
        ));
        assert!(matches!(
            ConfigFile::parse("a = 1\na = 2\n"),
            Err(CliError::ConfigSyntax { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_keys_are_named() {
        assert!(
            matches!(ConfigFile::parse("colour = red\n"), Err(CliError::UnknownKey(k)) if k == "colour")
        );
        let c = ConfigFile::parse("[synth]\nhieght = 3\n").unwrap();
        let err = Params::new("synth", Some(&c), &[], &["height"]).unwrap_err();
        assert!(err.to_string().contains("synth.hieght"));
        assert!(
            matches!(c.check_sections(&["reduce"]), Err(CliError::UnknownSection(s)) if s == "synth")
        );
    }

    #[test]
    fn overrides_win_and_values_parse() {
        let c = ConfigFile::parse(SAMPLE).unwrap();
        let p = Params::new(
            "synth",
            Some(&c),
            &[("height".into(), "32".into())],
            &["height", "snr_db"],
        )
        .unwrap();
        assert_eq!(p.require::<usize>("height").unwrap(), 32);
        assert_eq!(p.optional_real("snr_db").unwrap(), None);
        assert_eq!(p.get_or("width", 64usize).unwrap(), 64);
        let bad = Params::new(
            "synth",
            None,
            &[("height".into(), "tall".into())],
            &["height"],
        )
        .unwrap();
        assert!(matches!(
            bad.get::<usize>("height"),
            Err(CliError::InvalidValue { .. })
        ));
    }
}
