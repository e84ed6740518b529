//! Experiment configuration files.
//!
//! A configuration is a TOML document with a top-level `experiment` key and flat
//! sections:
//!
//! ```toml
//! experiment = "nonlinear-estimate"
//! seed = 11
//!
//! [algebra]
//! d = 2
//! n = [8, 16, 32]
//! theta_num = 1
//! backend = "matrix"
//!
//! [symbol]
//! exprs = ["tanh(x)"]
//!
//! [besov]
//! s = [0.5]
//! p = [2]
//! q = [2]
//!
//! [ensemble]
//! size = 20
//! band = 4
//! decay = 0.5
//!
//! [solver]
//! t_max = 1.0
//! dt = 0.01
//! delta = 1.0
//!
//! [output]
//! dir = "out/nonlinear"
//! ```
//!
//! Every section is optional. `p` and `q` entries are numbers or the string `"inf"`.

use std::fmt;
use std::str::FromStr;

use opcalc_core::linalg::SchattenIndex;
use opcalc_core::symbol::SmoothSymbol;
use opcalc_core::torus::{Backend, TorusAlgebra};
use serde::{Deserialize, Deserializer};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(l) = self.line {
            write!(f, " at line {l}")?;
        }
        if let Some(k) = &self.key {
            write!(f, " (key `{k}`)")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self { line: None, key: Some(key.to_string()), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    VerifyCore,
    Moi,
    ChainRule,
    BesovEquivalence,
    NonlinearEstimate,
    Meyer,
    AllenCahn,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::VerifyCore,
        ExperimentKind::Moi,
        ExperimentKind::ChainRule,
        ExperimentKind::BesovEquivalence,
        ExperimentKind::NonlinearEstimate,
        ExperimentKind::Meyer,
        ExperimentKind::AllenCahn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyCore => "verify-core",
            ExperimentKind::Moi => "moi",
            ExperimentKind::ChainRule => "chain-rule",
            ExperimentKind::BesovEquivalence => "besov-equivalence",
            ExperimentKind::NonlinearEstimate => "nonlinear-estimate",
            ExperimentKind::Meyer => "meyer",
            ExperimentKind::AllenCahn => "allen-cahn",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::VerifyCore => "linear algebra, symbol, operator-integral and torus identities",
            ExperimentKind::Moi => "binned operator-integral convergence in the bin count",
            ExperimentKind::ChainRule => "chain-rule expansion tables and residuals",
            ExperimentKind::BesovEquivalence => "ratios between block, difference and integral Besov norms",
            ExperimentKind::NonlinearEstimate => "boundedness and Lipschitz ratios of F(u) in Besov norm",
            ExperimentKind::Meyer => "telescoped Duhamel decomposition of exp(i xi u) - 1",
            ExperimentKind::AllenCahn => "mild-solution solver checks for the Allen-Cahn flow",
        }
    }

    /// Whether `capture_baseline` records constants for this experiment.
    pub fn has_baseline(self) -> bool {
        matches!(
            self,
            ExperimentKind::VerifyCore
                | ExperimentKind::BesovEquivalence
                | ExperimentKind::NonlinearEstimate
                | ExperimentKind::AllenCahn
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`; expected one of {}", names().join(", ")))
    }
}

fn names() -> Vec<&'static str> {
    ExperimentKind::ALL.iter().map(|k| k.name()).collect()
}

impl<'de> Deserialize<'de> for ExperimentKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Schatten exponent as written in a config: a number `≥ 1` or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub SchattenIndex);

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Str(s) if s == "inf" || s == "infinity" => f64::INFINITY,
            Raw::Str(s) => return Err(serde::de::Error::custom(format!("expected a number or \"inf\", found `{s}`"))),
        };
        SchattenIndex::new(v).map(Exponent).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0.value())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraSection {
    pub d: usize,
    pub n: Vec<usize>,
    pub theta_num: i64,
    pub backend: String,
}

impl Default for AlgebraSection {
    fn default() -> Self {
        Self { d: 2, n: vec![16], theta_num: 1, backend: "matrix".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolSection {
    pub exprs: Vec<String>,
}

impl Default for SymbolSection {
    fn default() -> Self {
        Self { exprs: vec!["tanh(x)".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovSection {
    pub s: Vec<f64>,
    pub p: Vec<Exponent>,
    pub q: Vec<Exponent>,
}

impl Default for BesovSection {
    fn default() -> Self {
        Self { s: vec![0.5], p: vec![Exponent(SchattenIndex::TWO)], q: vec![Exponent(SchattenIndex::TWO)] }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub size: usize,
    pub band: i64,
    /// Coefficients decay like `(1 + |k|²)^{−decay/2}`.
    pub decay: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { size: 20, band: 4, decay: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub t_max: f64,
    pub dt: f64,
    pub delta: f64,
    /// Trajectory snapshots are written every this many grid points (0 disables them).
    pub snapshot_every: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { t_max: 1.0, dt: 1e-2, delta: 1.0, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub algebra: AlgebraSection,
    #[serde(default)]
    pub symbol: SymbolSection,
    #[serde(default)]
    pub besov: BesovSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    hash: String,
}

fn default_seed() -> u64 {
    1
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let key = e
                .span()
                .and_then(|s| text.get(s.clone()))
                .map(|k| k.trim().trim_matches('"').to_string())
                .filter(|k| !k.is_empty() && !k.contains('\n'));
            ConfigError { line, key, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        cfg.hash = canonical_hash(text)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, key: None, message: format!("{}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    /// Default configuration of an experiment kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::parse(&format!("experiment = \"{kind}\"\n")).expect("defaults parse")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.algebra;
        if !(1..=2).contains(&a.d) {
            return Err(ConfigError::key("algebra.d", format!("dimension must be 1 or 2, found {}", a.d)));
        }
        if a.n.is_empty() {
            return Err(ConfigError::key("algebra.n", "at least one size is required"));
        }
        for &n in &a.n {
            if n < 2 || n % 2 != 0 {
                return Err(ConfigError::key("algebra.n", format!("sizes must be even and at least 2, found {n}")));
            }
        }
        self.backend()?;
        for e in &self.symbol.exprs {
            SmoothSymbol::parse(e).map_err(|err| ConfigError::key("symbol.exprs", format!("`{e}`: {err}")))?;
        }
        if self.besov.s.iter().any(|s| !s.is_finite()) {
            return Err(ConfigError::key("besov.s", "smoothness indices must be finite"));
        }
        if self.ensemble.size == 0 {
            return Err(ConfigError::key("ensemble.size", "must be positive"));
        }
        if self.ensemble.band < 0 {
            return Err(ConfigError::key("ensemble.band", "must be non-negative"));
        }
        let sv = &self.solver;
        if !(sv.dt > 0.0 && sv.t_max >= 0.0 && sv.delta > 0.0) {
            return Err(ConfigError::key("solver", "dt and delta must be positive, t_max non-negative"));
        }
        Ok(())
    }

    pub fn backend(&self) -> Result<Backend, ConfigError> {
        match self.algebra.backend.as_str() {
            "matrix" => Ok(Backend::Matrix),
            "commutative" => Ok(Backend::Commutative),
            other => Err(ConfigError::key("algebra.backend", format!("expected `matrix` or `commutative`, found `{other}`"))),
        }
    }

    pub fn algebra(&self, n: usize) -> Result<TorusAlgebra, ConfigError> {
        TorusAlgebra::new(self.algebra.d, n, self.algebra.theta_num, self.backend()?)
            .map_err(|e| ConfigError::key("algebra", e.to_string()))
    }

    pub fn symbols(&self) -> Vec<SmoothSymbol> {
        self.symbol.exprs.iter().map(|e| SmoothSymbol::parse(e).expect("validated")).collect()
    }

    /// SHA-256 of the canonicalized document, without the `[output]` section.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Canonical form: keys sorted at every level, `[output]` dropped, TOML re-serialized.
pub fn canonical_form(text: &str) -> Result<String, ConfigError> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| ConfigError { line: None, key: None, message: e.message().to_string() })?;
    table.remove("output");
    let value = sort_value(toml::Value::Table(table));
    toml::to_string(&value).map_err(|e| ConfigError { line: None, key: None, message: e.to_string() })
}

fn sort_value(v: toml::Value) -> toml::Value {
    match v {
        toml::Value::Table(t) => {
            let mut entries: Vec<(String, toml::Value)> = t.into_iter().map(|(k, v)| (k, sort_value(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            toml::Value::Table(entries.into_iter().collect())
        }
        toml::Value::Array(a) => toml::Value::Array(a.into_iter().map(sort_value).collect()),
        other => other,
    }
}

pub fn canonical_hash(text: &str) -> Result<String, ConfigError> {
    let canon = canonical_form(text)?;
    Ok(hex::encode(Sha256::digest(canon.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_for_every_kind() {
        for k in ExperimentKind::ALL {
            let c = ExperimentConfig::defaults(k);
            assert_eq!(c.experiment, k);
            assert_eq!(c.hash().len(), 64);
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
    }

    #[test]
    fn hash_ignores_key_order_and_output() {
        let a = "experiment = \"moi\"\nseed = 3\n[algebra]\nn = [8]\nd = 2\n[output]\ndir = \"x\"\n";
        let b = "seed = 3\nexperiment = \"moi\"\n\n[algebra]\nd = 2\nn = [8]\n";
        assert_eq!(canonical_hash(a).unwrap(), canonical_hash(b).unwrap());
        let c = "seed = 4\nexperiment = \"moi\"\n[algebra]\nd = 2\nn = [8]\n";
        assert_ne!(canonical_hash(a).unwrap(), canonical_hash(c).unwrap());
    }

    #[test]
    fn exponents_and_diagnostics() {
        let c = ExperimentConfig::parse("experiment = \"besov-equivalence\"\n[besov]\np = [1, 2, \"inf\"]\n").unwrap();
        assert!(c.besov.p[2].0.is_infinite());
        assert_eq!(c.besov.p[0].to_string(), "1");

        let e = ExperimentConfig::parse("experiment = \"moi\"\n[algebra]\nd = 2\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert_eq!(e.key.as_deref(), Some("bogus"));
        let e = ExperimentConfig::parse("experiment = \"nope\"\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        assert!(e.message.contains("unknown experiment"));
        let e = ExperimentConfig::parse("experiment = \"moi\"\n[besov]\np = [0.5]\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = ExperimentConfig::parse("experiment = \"moi\"\n[algebra]\nn = [7]\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("algebra.n"));
        let e = ExperimentConfig::parse("experiment = \"moi\"\n[symbol]\nexprs = [\"tanh(\"]\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("symbol.exprs"));
        assert!(ExperimentConfig::parse("experiment = ").is_err());
    }
}
