//! Committed empirical constants keyed by configuration hash.
//!
//! The file is line oriented. Each entry line holds four whitespace-separated fields
//!
//! ```text
//! <config-hash> <experiment> <name> <value>
//! ```
//!
//! and lines starting with `#` are comments. Forced overwrites append an audit comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Result, WorkbenchError};

/// Location of the committed baseline file inside the source tree.
pub fn default_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("baselines").join("constants.txt")
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    experiment: String,
    constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineStore {
    entries: BTreeMap<String, Entry>,
    audit: Vec<String>,
}

const HEADER: &str = "# opcalc baseline constants\n# <config-hash> <experiment> <name> <value>\n";

impl BaselineStore {
    pub fn parse(text: &str) -> Result<Self> {
        let mut store = BaselineStore::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# audit ") {
                store.audit.push(rest.to_string());
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |message: String| WorkbenchError::BaselineFormat { line: i + 1, message };
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let value: f64 = fields[3].parse().map_err(|_| bad(format!("`{}` is not a number", fields[3])))?;
            let e = store
                .entries
                .entry(fields[0].to_string())
                .or_insert_with(|| Entry { experiment: fields[1].to_string(), constants: BTreeMap::new() });
            if e.experiment != fields[1] {
                return Err(bad(format!("hash {} listed under two experiments", fields[0])));
            }
            e.constants.insert(fields[2].to_string(), value);
        }
        Ok(store)
    }

    /// Reads `path`; a missing file is an empty store.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(t) => Self::parse(&t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::from(HEADER);
        for (hash, e) in &self.entries {
            for (name, v) in &e.constants {
                let _ = writeln!(s, "{hash} {} {name} {v:?}", e.experiment);
            }
        }
        for a in &self.audit {
            let _ = writeln!(s, "# audit {a}");
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn constants(&self, hash: &str, experiment: &str) -> Result<&BTreeMap<String, f64>> {
        self.entries
            .get(hash)
            .map(|e| &e.constants)
            .ok_or_else(|| WorkbenchError::MissingBaseline { experiment: experiment.into(), hash: hash.into() })
    }

    pub fn get(&self, hash: &str, experiment: &str, name: &str) -> Result<f64> {
        self.constants(hash, experiment)?
            .get(name)
            .copied()
            .ok_or_else(|| WorkbenchError::MissingBaseline { experiment: format!("{experiment}:{name}"), hash: hash.into() })
    }

    /// Records the constants of one configuration; refuses to replace an existing entry
    /// unless `force`, in which case an audit line is appended.
    pub fn insert(
        &mut self,
        hash: &str,
        experiment: &str,
        constants: BTreeMap<String, f64>,
        force: bool,
        note: &str,
    ) -> Result<()> {
        if self.entries.contains_key(hash) {
            if !force {
                return Err(WorkbenchError::BaselineExists(hash.into()));
            }
            self.audit.push(format!("overwrote {hash} {experiment} {note}"));
        }
        self.entries.insert(hash.into(), Entry { experiment: experiment.into(), constants });
        Ok(())
    }
}
