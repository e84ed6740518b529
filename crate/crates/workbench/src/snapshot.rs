//! Plain-text snapshots of torus elements.
//!
//! ```text
//! opcalc-torus 1
//! d=2 n=16 theta_num=1 backend=matrix oversample=1
//! time=0.25
//! <k1> <k2> <re> <im>
//! ...
//! ```
//!
//! Only nonzero coefficients are listed, in mode-index order. Floats use the shortest
//! round-trip representation so a snapshot reloads bit-exactly. The `time` line is optional.

use std::fmt::Write as _;

use opcalc_core::torus::{Backend, TorusAlgebra, TorusElement};
use opcalc_core::C64;

use crate::error::{Result, WorkbenchError};

const MAGIC: &str = "opcalc-torus 1";

pub fn write_snapshot(x: &TorusElement, time: Option<f64>) -> String {
    let a = x.algebra();
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(
        s,
        "d={} n={} theta_num={} backend={} oversample={}",
        a.d(),
        a.n(),
        a.theta_num(),
        a.backend().name(),
        a.oversample()
    );
    if let Some(t) = time {
        let _ = writeln!(s, "time={t:?}");
    }
    for (i, c) in x.coeffs().iter().enumerate() {
        if c.re != 0.0 || c.im != 0.0 {
            let k = a.mode(i);
            let _ = writeln!(s, "{} {} {:?} {:?}", k[0], k[1], c.re, c.im);
        }
    }
    s
}

fn bad(line: usize, message: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Snapshot { line, message: message.into() }
}

pub fn read_snapshot(text: &str) -> Result<(TorusElement, Option<f64>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, _)) => return Err(bad(n, "missing `opcalc-torus 1` header")),
        None => return Err(bad(1, "empty snapshot")),
    }
    let (hl, header) = lines.next().ok_or_else(|| bad(2, "missing algebra line"))?;
    let mut d = None;
    let mut n = None;
    let mut theta = None;
    let mut backend = None;
    let mut over = 1usize;
    for field in header.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| bad(hl, format!("`{field}` is not key=value")))?;
        let num = || v.parse::<i64>().map_err(|_| bad(hl, format!("`{v}` is not an integer")));
        match k {
            "d" => d = Some(num()? as usize),
            "n" => n = Some(num()? as usize),
            "theta_num" => theta = Some(num()?),
            "oversample" => over = num()? as usize,
            "backend" => {
                backend = Some(match v {
                    "matrix" => Backend::Matrix,
                    "commutative" => Backend::Commutative,
                    _ => return Err(bad(hl, format!("unknown backend `{v}`"))),
                })
            }
            _ => return Err(bad(hl, format!("unknown key `{k}`"))),
        }
    }
    let (Some(d), Some(n), Some(theta), Some(backend)) = (d, n, theta, backend) else {
        return Err(bad(hl, "algebra line needs d, n, theta_num and backend"));
    };
    let alg = TorusAlgebra::new(d, n, theta, backend)?.with_oversampling(over)?;
    let mut x = alg.zero();
    let mut time = None;
    for (ln, line) in lines {
        if let Some(t) = line.strip_prefix("time=") {
            time = Some(t.parse::<f64>().map_err(|_| bad(ln, format!("`{t}` is not a time")))?);
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(ln, format!("expected `k1 k2 re im`, found {} fields", f.len())));
        }
        let k1: i64 = f[0].parse().map_err(|_| bad(ln, "mode is not an integer"))?;
        let k2: i64 = f[1].parse().map_err(|_| bad(ln, "mode is not an integer"))?;
        let re: f64 = f[2].parse().map_err(|_| bad(ln, "coefficient is not a number"))?;
        let im: f64 = f[3].parse().map_err(|_| bad(ln, "coefficient is not a number"))?;
        let m = alg.resolution() as i64;
        let inside = |k: i64| (-m / 2..m / 2).contains(&k);
        if !inside(k1) || !inside(k2) || (d == 1 && k2 != 0) {
            return Err(bad(ln, format!("mode ({k1}, {k2}) outside the lattice")));
        }
        x.set_coeff([k1, k2], C64::new(re, im));
    }
    Ok((x, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use opcalc_core::torus::random_band_element;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn snapshots_reload_exactly(seed in 0u64..10_000, n in prop::sample::select(vec![4usize, 8, 16]), p in 0i64..4, d in 1usize..=2) {
            let alg = if d == 1 { TorusAlgebra::commutative(1, n) } else { TorusAlgebra::matrix(n, p) }.unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x = random_band_element(&alg, &mut r, 3, 0.5, seed % 2 == 0);
            let t = (seed % 3 == 0).then_some(seed as f64 * 1e-3);
            let (y, ty) = read_snapshot(&write_snapshot(&x, t)).unwrap();
            prop_assert_eq!(y.coeffs(), x.coeffs());
            prop_assert_eq!(y.algebra(), x.algebra());
            prop_assert_eq!(ty, t);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_snapshot("").is_err());
        assert!(read_snapshot("opcalc-torus 2\n").is_err());
        let head = "opcalc-torus 1\nd=2 n=4 theta_num=1 backend=matrix oversample=1\n";
        assert!(read_snapshot(&format!("{head}0 0 1.0\n")).is_err());
        assert!(read_snapshot(&format!("{head}2 0 1.0 0.0\n")).is_err());
        assert!(read_snapshot(&format!("{head}-2 1 1.0 0.0\n")).is_ok());
        assert!(read_snapshot("opcalc-torus 1\nd=2 n=4 backend=matrix\n").is_err());
    }
}
