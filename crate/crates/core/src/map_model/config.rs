//! TOML map descriptions.
//!
//! ```toml
//! name = "tent3"
//! ly_alpha = "1/3"        # optional, both or neither
//! ly_b0 = "0"
//!
//! [[branch]]
//! domain = ["0", "1/3"]
//! coeffs = ["0", "3"]     # lowest degree first
//!
//! [[branch]]
//! domain = ["1/3", "2/3"]
//! forward = "2 - 3x"      # alternatively, an expression in x
//!
//! [[branch]]
//! domain = [{ solve = "0", bracket = ["0.6", "0.7"] }, "1"]
//! coeffs = ["-2", "3"]
//! ```
//!
//! A `solve` endpoint is the point of `bracket` where this branch takes the given value.

use std::path::Path;

use serde::Deserialize;

use super::{Branch, LyConstants, LySource, PiecewiseMap};
use crate::error::{Error, Result};
use crate::rigor::{parse_poly, parse_rational, Interval, RatPoly};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    name: Option<String>,
    ly_alpha: Option<String>,
    ly_b0: Option<String>,
    #[serde(rename = "branch")]
    branches: Vec<BranchSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchSpec {
    domain: [Endpoint; 2],
    coeffs: Option<Vec<String>>,
    forward: Option<String>,
}

#[derive(Debug, Deserialize, Clone, PartialEq)]
#[serde(untagged)]
enum Endpoint {
    Exact(String),
    Solve { solve: String, bracket: [String; 2] },
}

pub fn load(path: &Path) -> Result<PiecewiseMap> {
    let text = std::fs::read_to_string(path)?;
    let default_name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse(&text, default_name.as_deref().unwrap_or("custom"))
}

pub fn parse(text: &str, default_name: &str) -> Result<PiecewiseMap> {
    let file: MapFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.branches.is_empty() {
        return Err(Error::Parse("map config has no [[branch]] sections".into()));
    }
    let mut polys = Vec::new();
    let mut ends = Vec::new();
    for (i, b) in file.branches.iter().enumerate() {
        let poly = match (&b.coeffs, &b.forward) {
            (Some(c), None) => RatPoly(c.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?).trimmed(),
            (None, Some(f)) => parse_poly(f)?,
            _ => return Err(Error::Parse(format!("branch {i}: give exactly one of coeffs, forward"))),
        };
        let lo = resolve(&b.domain[0], &poly)?;
        let hi = resolve(&b.domain[1], &poly)?;
        polys.push(poly);
        ends.push((lo, hi));
    }
    let mut order: Vec<usize> = (0..ends.len()).collect();
    order.sort_by(|&a, &b| ends[a].0.mid().total_cmp(&ends[b].0.mid()));
    for w in order.windows(2) {
        let (end, start) = (ends[w[0]].1, ends[w[1]].0);
        match end.intersect(start) {
            Some(common) => {
                ends[w[0]].1 = common;
                ends[w[1]].0 = common;
            }
            None if end.hi() < start.lo() => {
                return Err(Error::Parse(format!("gap between branches {} and {}", w[0], w[1])));
            }
            None => return Err(Error::Parse(format!("overlapping branch domains {} and {}", w[0], w[1]))),
        }
    }
    let mut branches = Vec::new();
    for &i in &order {
        let (lo, hi) = ends[i];
        if lo.hi() >= hi.lo() {
            return Err(Error::Parse(format!("branch {i} has an empty or reversed domain")));
        }
        branches.push(Branch::from_rational(lo, hi, polys[i].clone())?);
    }
    let ly = match (&file.ly_alpha, &file.ly_b0) {
        (Some(a), Some(b)) => Some(LyConstants {
            alpha: Interval::from_rational(&parse_rational(a)?),
            b0: Interval::from_rational(&parse_rational(b)?),
            source: LySource::UserSupplied,
        }),
        (None, None) => None,
        _ => return Err(Error::Parse("give both ly_alpha and ly_b0, or neither".into())),
    };
    PiecewiseMap::new(file.name.as_deref().unwrap_or(default_name), branches, ly)
}

fn resolve(e: &Endpoint, poly: &RatPoly) -> Result<Interval> {
    match e {
        Endpoint::Exact(s) => Ok(Interval::from_rational(&parse_rational(s)?)),
        Endpoint::Solve { solve, bracket } => {
            let target = Interval::from_rational(&parse_rational(solve)?);
            let a = Interval::from_rational(&parse_rational(&bracket[0])?);
            let b = Interval::from_rational(&parse_rational(&bracket[1])?);
            let p = poly.to_interval();
            let dp = p.derivative();
            let mut x = Interval::new(a.lo(), b.hi());
            let sign = |v: Interval| -> Option<bool> {
                let s = p.eval(v) - target;
                if s.lo() > 0.0 {
                    Some(true)
                } else if s.hi() < 0.0 {
                    Some(false)
                } else {
                    None
                }
            };
            let (sa, sb) = (sign(Interval::point(x.lo())), sign(Interval::point(x.hi())));
            let (Some(sa), Some(sb)) = (sa, sb) else {
                return Err(Error::Parse(format!("cannot certify a sign change of the branch on {x}")));
            };
            if sa == sb || dp.range(x).contains_zero() {
                return Err(Error::Parse(format!("bracket {x} does not isolate a simple root")));
            }
            // Verified bisection, then interval Newton.
            for _ in 0..200 {
                let m = x.mid();
                if !(x.lo() < m && m < x.hi()) {
                    break;
                }
                match sign(Interval::point(m)) {
                    Some(s) if s == sa => x = Interval::new(m, x.hi()),
                    Some(_) => x = Interval::new(x.lo(), m),
                    None => break,
                }
            }
            for _ in 0..3 {
                let m = Interval::point(x.mid());
                let step = (p.eval(m) - target).checked_div(dp.eval(x))?;
                match x.intersect(m - step) {
                    Some(n) => x = n,
                    None => return Err(Error::Parse("interval Newton found no root".into())),
                }
            }
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TENT3: &str = r#"
name = "tent3"
[[branch]]
domain = ["0", "1/3"]
coeffs = ["0", "3"]
[[branch]]
domain = ["1/3", "2/3"]
forward = "2 - 3x"
[[branch]]
domain = ["2/3", "1"]
coeffs = ["-2", "3"]
"#;

    const LANFORD_LIKE: &str = r#"
ly_alpha = "0.66666667"
ly_b0 = "1.444444445"
[[branch]]
domain = ["0", { solve = "1", bracket = ["0.4", "0.5"] }]
forward = "2.5x - 0.5x^2"
[[branch]]
domain = [{ solve = "0", bracket = ["0.4", "0.5"] }, "1"]
forward = "-1 + 2.5x - 0.5x^2"
"#;

    #[test]
    fn parses_tent() {
        let m = parse(TENT3, "x").unwrap();
        assert_eq!(m.name(), "tent3");
        assert_eq!(m.branches().len(), 3);
        assert!(m.ly().alpha.hi() <= 1.0 / 3.0 + f64::EPSILON);
        assert_eq!(m.ly().source, LySource::Derived);
    }

    #[test]
    fn solved_endpoints_match_registry() {
        let m = parse(LANFORD_LIKE, "lanford-like").unwrap();
        let cut = m.branches()[0].domain_hi();
        assert!(cut.overlaps(crate::map_model::registry::lanford_cut()));
        assert!(cut.width() < 1e-15);
        assert_eq!(m.ly().source, LySource::UserSupplied);
    }

    #[test]
    fn overlapping_domains_are_rejected() {
        let bad = TENT3.replace(r#"domain = ["1/3", "2/3"]"#, r#"domain = ["1/4", "2/3"]"#);
        let err = parse(&bad, "x").unwrap_err();
        assert!(matches!(err, Error::Parse(ref s) if s.contains("overlapping")), "{err}");
        let gap = TENT3.replace(r#"domain = ["1/3", "2/3"]"#, r#"domain = ["0.4", "2/3"]"#);
        assert!(parse(&gap, "x").is_err());
    }

    #[test]
    fn malformed_input() {
        assert!(parse("name = 3", "x").is_err());
        assert!(parse("[[branch]]\ndomain=[\"0\",\"1\"]\n", "x").is_err());
        assert!(parse(&TENT3.replace("ly", "zz").replace("name", "ly_alpha"), "x").is_err());
    }
}
