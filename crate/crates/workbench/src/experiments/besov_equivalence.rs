//! Ratios between the multiplier, difference and integral Besov norms over an ensemble.
//!
//! For each `(s, p, q)`, pair of norms and lattice size the ensemble gives a band
//! `[min, max]` of ratios. A baseline capture records the bands; a check requires every ratio
//! to stay inside them and each band to widen by less than 10% per doubling of `N`.

use std::collections::BTreeMap;

use opcalc_core::besov::{AmplitudeSampling, BlockNorms, DifferenceData, DifferenceOrder};
use opcalc_core::linalg::SchattenIndex;
use opcalc_core::torus::TorusElement;
use rayon::prelude::*;

use super::{ensemble, Context, Mode};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{num, Check, Report, Table};

pub const PAIRS: [&str; 3] = ["difference/multiplier", "integral/multiplier", "integral/difference"];

/// The three norms of one element at one index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormTriple {
    pub multiplier: f64,
    pub difference: f64,
    pub integral: f64,
}

impl NormTriple {
    pub fn ratios(&self) -> [f64; 3] {
        [self.difference / self.multiplier, self.integral / self.multiplier, self.integral / self.difference]
    }
}

/// Band key: `(s, p, q)` as given in the config.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Index3 {
    pub s: f64,
    pub p: SchattenIndex,
    pub q: SchattenIndex,
}

fn exp_name(p: SchattenIndex) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{}", p.value())
    }
}

impl Index3 {
    pub fn tag(&self) -> String {
        format!("s{}.p{}.q{}", self.s, exp_name(self.p), exp_name(self.q))
    }
}

/// `norms[i][e]` is the triple of element `e` at index `indices[i]`.
pub fn norm_triples(xs: &[TorusElement], indices: &[Index3], sampling: &AmplitudeSampling) -> Result<Vec<Vec<NormTriple>>> {
    let mut ps: Vec<SchattenIndex> = Vec::new();
    for i in indices {
        if !ps.contains(&i.p) {
            ps.push(i.p);
        }
    }
    let mut ss: Vec<f64> = Vec::new();
    for i in indices {
        if !ss.contains(&i.s) {
            ss.push(i.s);
        }
    }
    let per_element: Vec<Vec<NormTriple>> = xs
        .par_iter()
        .map(|x| -> Result<Vec<NormTriple>> {
            let blocks = BlockNorms::compute(x, &ps)?;
            let data: Vec<DifferenceData> = ss
                .iter()
                .map(|&s| DifferenceData::compute(x, DifferenceOrder::default_for(s), sampling, &ps))
                .collect::<opcalc_core::Result<_>>()?;
            indices
                .iter()
                .map(|i| {
                    let pi = ps.iter().position(|p| *p == i.p).expect("p collected above");
                    let d = &data[ss.iter().position(|s| *s == i.s).expect("s collected above")];
                    Ok(NormTriple {
                        multiplier: blocks.besov(i.s, pi, i.q),
                        difference: d.difference_norm(i.s, pi, i.q)?.value,
                        integral: d.integral_norm(i.s, pi, i.q)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..indices.len()).map(|i| per_element.iter().map(|e| e[i]).collect()).collect())
}

/// `(min, max)` of each ratio pair over an ensemble.
pub fn bands(triples: &[NormTriple]) -> [(f64, f64); 3] {
    let mut out = [(f64::INFINITY, 0.0f64); 3];
    for t in triples {
        for (b, r) in out.iter_mut().zip(t.ratios()) {
            b.0 = b.0.min(r);
            b.1 = b.1.max(r);
        }
    }
    out
}

/// Multiplicative band width `max / min`.
pub fn width(b: (f64, f64)) -> f64 {
    b.1 / b.0
}

fn pair_tag(i: usize) -> &'static str {
    ["diff_mult", "int_mult", "int_diff"][i]
}

pub fn indices(cfg: &ExperimentConfig) -> Vec<Index3> {
    let mut v = Vec::new();
    for &s in &cfg.besov.s {
        for p in &cfg.besov.p {
            for q in &cfg.besov.q {
                v.push(Index3 { s, p: p.0, q: q.0 });
            }
        }
    }
    v
}

/// Band per `(N, index, pair)`.
pub type BandTable = BTreeMap<(usize, String, usize), (f64, f64)>;

pub fn measure(cfg: &ExperimentConfig, ctx: &Context, sampling: &AmplitudeSampling) -> Result<(BandTable, Table)> {
    let idx = indices(cfg);
    let mut out = BandTable::new();
    let mut t = Table::new(&["n", "index", "pair", "min", "max", "width"]);
    let smallest = cfg.algebra.n.iter().copied().min().unwrap_or(8) as i64;
    let band = cfg.ensemble.band.min(smallest / 2 - 1);
    for &n in &cfg.algebra.n {
        let alg = cfg.algebra(n)?;
        // one ensemble, embedded at every N
        let xs = ensemble(&alg, ctx.seeds, cfg.ensemble.size, band, cfg.ensemble.decay);
        let triples = norm_triples(&xs, &idx, sampling)?;
        for (i, tr) in idx.iter().zip(&triples) {
            for (k, b) in bands(tr).into_iter().enumerate() {
                t.push(vec![n.to_string(), i.tag(), PAIRS[k].into(), num(b.0), num(b.1), num(width(b))]);
                out.insert((n, i.tag(), k), b);
            }
        }
    }
    Ok((out, t))
}

/// Default directions and radii on a lattice of resolution `2·max N`, shared by every `N` so
/// all lattice sizes see the same difference steps.
pub fn sampling(cfg: &ExperimentConfig) -> AmplitudeSampling {
    let largest = cfg.algebra.n.iter().copied().max().unwrap_or(8);
    AmplitudeSampling { resolution: 2 * largest, ..AmplitudeSampling::default() }
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Report> {
    let mut rep = Report::default();
    let (bands, table) = measure(cfg, ctx, &sampling(cfg))?;
    rep.table("bands", table);
    let ns = &cfg.algebra.n;
    for ((n, tag, k), b) in &bands {
        let key = format!("{tag}.{}.n{n}", pair_tag(*k));
        rep.constants.insert(format!("{key}.lo"), b.0);
        rep.constants.insert(format!("{key}.hi"), b.1);
        if ctx.mode == Mode::Check {
            let lo = ctx.baseline(cfg, &format!("{key}.lo"))?;
            let hi = ctx.baseline(cfg, &format!("{key}.hi"))?;
            // the band is recomputed from the same draws; rounding is the only slack
            rep.check(Check::at_least(format!("inside.{key}.lo"), b.0, lo * (1.0 - 1e-9)));
            rep.check(Check::at_most(format!("inside.{key}.hi"), b.1, hi * (1.0 + 1e-9)));
        }
    }
    for w in ns.windows(2) {
        for ((n, tag, k), b) in bands.iter().filter(|e| e.0 .0 == w[1]) {
            let prev = bands[&(w[0], tag.clone(), *k)];
            rep.check(Check::at_most(format!("widening.{tag}.{}.n{}to{n}", pair_tag(*k), w[0]), width(*b) / width(prev), 1.1));
        }
    }
    Ok(rep)
}
