//! Assertions, CSV tables and the key=value summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// How a measured value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Within,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Upper end for [`Relation::Within`].
    pub upper: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: bound, relation: Relation::AtMost, pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: bound, relation: Relation::AtLeast, pass: value >= bound }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, bound: lo, upper: hi, relation: Relation::Within, pass: value >= lo && value <= hi }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    fn bound_text(&self) -> String {
        match self.relation {
            Relation::AtMost => format!("<= {:e}", self.bound),
            Relation::AtLeast => format!(">= {:e}", self.bound),
            Relation::Within => format!("in [{:e}, {:e}]", self.bound, self.upper),
        }
    }
}

/// A CSV table; written with RFC-4180 quoting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Plot-data and detail tables by file stem.
    pub tables: BTreeMap<String, Table>,
    /// Constants a baseline capture records.
    pub constants: BTreeMap<String, f64>,
    /// Extra summary lines.
    pub info: BTreeMap<String, String>,
    /// Other files by relative path, written verbatim.
    pub attachments: BTreeMap<String, String>,
}

impl Report {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, name: &str, t: Table) {
        self.tables.insert(name.to_string(), t);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn merge(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        for (k, t) in other.tables {
            self.tables.insert(format!("{prefix}{k}"), t);
        }
        for (k, v) in other.constants {
            self.constants.insert(format!("{prefix}{k}"), v);
        }
        for (k, v) in other.info {
            self.info.insert(format!("{prefix}{k}"), v);
        }
        self.attachments.extend(other.attachments);
    }

    /// The line-oriented `key=value` summary.
    pub fn summary(&self, experiment: &str, config_hash: &str, seed: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment={experiment}");
        let _ = writeln!(s, "config_hash={config_hash}");
        let _ = writeln!(s, "seed={seed}");
        for (k, v) in &self.info {
            let _ = writeln!(s, "info.{k}={v}");
        }
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "fail" };
            let _ = writeln!(s, "check.{}={status} value={} bound={}", c.name, num(c.value), c.bound_text());
        }
        for (k, v) in &self.constants {
            let _ = writeln!(s, "constant.{k}={}", num(*v));
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "assertions={}", self.checks.len());
        let _ = writeln!(s, "failed={failed}");
        let _ = writeln!(s, "status={}", if failed == 0 { "pass" } else { "fail" });
        s
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["check", "status", "value", "relation", "bound", "upper"]);
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "at_most",
                Relation::AtLeast => "at_least",
                Relation::Within => "within",
            };
            t.push(vec![
                c.name.clone(),
                if c.pass { "pass" } else { "fail" }.into(),
                num(c.value),
                rel.into(),
                num(c.bound),
                num(c.upper),
            ]);
        }
        t
    }

    /// Writes `summary.txt`, `checks.csv`, one CSV per table and the attachments into `dir`.
    pub fn write(&self, dir: &Path, experiment: &str, config_hash: &str, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.txt"), self.summary(experiment, config_hash, seed))?;
        std::fs::write(dir.join("checks.csv"), self.checks_table().to_csv()?)?;
        for (name, t) in &self.tables {
            std::fs::write(dir.join(format!("{name}.csv")), t.to_csv()?)?;
        }
        for (path, text) in &self.attachments {
            let target = dir.join(path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a,b".into(), "say \"hi\"".into()]);
        assert_eq!(t.to_csv().unwrap(), "name,value\n\"a,b\",\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn summary_lines() {
        let mut r = Report::default();
        r.check(Check::at_most("residual", 1e-13, 1e-11));
        r.check(Check::within("slope", -1.5, -1.3, -0.7));
        r.constants.insert("ratio.max".into(), 0.5);
        let s = r.summary("moi", "abc", 3);
        assert!(s.contains("check.residual=pass value=1e-13 bound=<= 1e-11\n"));
        assert!(s.contains("check.slope=fail"));
        assert!(s.ends_with("assertions=2\nfailed=1\nstatus=fail\n"));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
    }
}
