use std::path::Path;

use super::{config, ly_constants_full_branch, Branch, LyConstants, LySource, PiecewiseMap};
use crate::error::{Error, Result};
use crate::rigor::{parse_poly, parse_rational, Interval};

/// Published Lasota–Yorke constants for Lanford's map.
pub const LANFORD_ALPHA: &str = "0.66666667";
pub const LANFORD_B0: &str = "1.444444445";

/// Looks up `"lanford"`, `"doubling"`, or loads a map config file from a path.
pub fn registry_get(name: &str) -> Result<PiecewiseMap> {
    match name {
        "lanford" => lanford(),
        "doubling" => doubling(),
        path => {
            let p = Path::new(path);
            if !p.is_file() {
                return Err(Error::MapNotFound(path.to_string()));
            }
            config::load(p)
        }
    }
}

/// Enclosure of the cut point `x* = 5/2 - sqrt(17/4)`, the root of `5x/2 - x²/2 = 1`.
pub fn lanford_cut() -> Interval {
    Interval::point(2.5) - Interval::point(4.25).sqrt().expect("positive")
}

/// `T(x) = 2x + x(1 - x)/2 mod 1`.
///
/// The published constants are used when the derived ones do not exceed them,
/// so that certificates reproduce the published matrix of norms.
pub fn lanford() -> Result<PiecewiseMap> {
    let cut = lanford_cut();
    let branches = vec![
        Branch::from_rational(Interval::ZERO, cut, parse_poly("5/2 x - 1/2 x^2")?)?,
        Branch::from_rational(cut, Interval::ONE, parse_poly("-1 + 5/2 x - 1/2 x^2")?)?,
    ];
    let derived = ly_constants_full_branch(&branches)?;
    let published = LyConstants {
        alpha: Interval::from_rational(&parse_rational(LANFORD_ALPHA)?),
        b0: Interval::from_rational(&parse_rational(LANFORD_B0)?),
        source: LySource::Published,
    };
    let ly = if derived.alpha.hi() <= published.alpha.lo() && derived.b0.hi() <= published.b0.lo() {
        published
    } else {
        // The published pair is not implied by our derivation; fall back to it as data.
        LyConstants { source: LySource::UserSupplied, ..published }
    };
    PiecewiseMap::new("lanford", branches, Some(ly))
}

/// `T(x) = 2x mod 1`.
pub fn doubling() -> Result<PiecewiseMap> {
    let half = Interval::point(0.5);
    let branches = vec![
        Branch::from_rational(Interval::ZERO, half, parse_poly("2x")?)?,
        Branch::from_rational(half, Interval::ONE, parse_poly("2x - 1")?)?,
    ];
    PiecewiseMap::new("doubling", branches, None)
}
