//! Piecewise expanding maps of `[0, 1]` with certified branch inverses and
//! Lasota–Yorke constants.

mod branch;
pub mod config;
pub mod registry;

pub use branch::Branch;
pub use registry::registry_get;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rigor::Interval;

/// Where a pair of Lasota–Yorke constants came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LySource {
    /// Computed by [`ly_constants_full_branch`].
    Derived,
    /// Published constants for a registry map, checked against the derived ones.
    Published,
    /// Given in a map config file; trusted and echoed in reports.
    UserSupplied,
}

/// Constants of `V(Pf) ≤ α V(f) + B₀ ‖f‖₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyConstants {
    pub alpha: Interval,
    pub b0: Interval,
    pub source: LySource,
}

impl LyConstants {
    /// `Γ = max{α + 1, B₀}`, the constant of `|||P_ε - P||| ≤ Γ ε`.
    pub fn gamma(&self) -> Interval {
        (self.alpha + Interval::ONE).max(self.b0)
    }

    /// `1 - α`, bounded away from zero.
    pub fn one_minus_alpha(&self) -> Interval {
        Interval::ONE - self.alpha
    }

    /// `B₀ / (1 - α)`, the uniform bound on `V(P^n f)` per unit of `‖f‖₁`.
    pub fn b0_over_gap(&self) -> Interval {
        self.b0.checked_div(self.one_minus_alpha()).expect("alpha < 1")
    }
}

/// A piecewise C² expanding map of `[0, 1]`.
#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    name: String,
    branches: Vec<Branch>,
    ly: LyConstants,
}

impl PiecewiseMap {
    /// Validates that the branches partition `[0, 1]` and that `α < 1`.
    ///
    /// Without explicit constants, the full-branch helper is used.
    pub fn new(name: impl Into<String>, branches: Vec<Branch>, ly: Option<LyConstants>) -> Result<Self> {
        let name = name.into();
        if branches.is_empty() {
            return Err(Error::InvalidMap("no branches".into()));
        }
        if !branches[0].domain_lo().contains(0.0) || !branches.last().unwrap().domain_hi().contains(1.0) {
            return Err(Error::InvalidMap("branch domains must cover [0, 1]".into()));
        }
        for (i, w) in branches.windows(2).enumerate() {
            if !w[0].domain_hi().overlaps(w[1].domain_lo()) {
                let kind = if w[0].domain_hi().hi() < w[1].domain_lo().lo() { "gap" } else { "overlap" };
                return Err(Error::InvalidMap(format!("{kind} between branches {i} and {}", i + 1)));
            }
        }
        let ly = match ly {
            Some(ly) => ly,
            None => ly_constants_full_branch(&branches)?,
        };
        if !(ly.alpha.hi() < 1.0) {
            return Err(Error::InvalidMap(format!("Lasota-Yorke alpha {} is not below 1", ly.alpha)));
        }
        if ly.alpha.lo() < 0.0 || ly.b0.lo() < 0.0 {
            return Err(Error::InvalidMap("Lasota-Yorke constants must be nonnegative".into()));
        }
        Ok(PiecewiseMap { name, branches, ly })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn ly(&self) -> LyConstants {
        self.ly
    }

    pub fn with_ly(mut self, ly: LyConstants) -> Result<Self> {
        if !(ly.alpha.hi() < 1.0) {
            return Err(Error::InvalidMap(format!("Lasota-Yorke alpha {} is not below 1", ly.alpha)));
        }
        self.ly = ly;
        Ok(self)
    }

    pub fn gamma_const(&self) -> Interval {
        self.ly.gamma()
    }

    /// Certified upper bound of `sup |T'|` over all branches.
    pub fn max_slope(&self) -> f64 {
        self.branches.iter().map(|b| b.derivative_range().mag()).fold(0.0, f64::max)
    }

    /// Stable digest of the branch data, used to key operator caches.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for b in &self.branches {
            for v in [b.domain_lo(), b.domain_hi()] {
                h.update(v.lo().to_le_bytes());
                h.update(v.hi().to_le_bytes());
            }
            for c in b.forward().coeffs() {
                h.update(c.lo().to_le_bytes());
                h.update(c.hi().to_le_bytes());
            }
        }
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().unwrap())
    }

    /// Index of a branch whose domain may contain `x`.
    pub fn branch_index(&self, x: f64) -> usize {
        self.branches
            .iter()
            .position(|b| x <= b.domain_hi().mid())
            .unwrap_or(self.branches.len() - 1)
    }

    /// Floating-point evaluation, for diagnostics and heuristics only.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].forward().eval_f64(x).clamp(0.0, 1.0)
    }
}

/// Lasota–Yorke constants for maps whose branches are all onto `[0, 1]`.
///
/// With `λ = inf|T'|`, each onto branch contributes
/// `V(f/|T'| ∘ T_b⁻¹) ≤ λ⁻¹ V_{I_b}(f) + sup|T''/T'²| ∫_{I_b}|f|`, so
/// `α = 1/λ` and `B₀ = max_b sup|T''/T'²|`.
pub fn ly_constants_full_branch(branches: &[Branch]) -> Result<LyConstants> {
    if let Some(i) = branches.iter().position(|b| !b.is_onto()) {
        return Err(Error::UnsupportedMap(format!(
            "branch {i} is not onto [0, 1]; supply ly_alpha and ly_b0 in the map config \
             (or pass to an iterate of the map)"
        )));
    }
    let lambda = branches.iter().map(|b| b.min_slope()).fold(f64::INFINITY, f64::min);
    let alpha = Interval::point(lambda).recip()?;
    let alpha = Interval::new(alpha.lo().min(alpha.hi()), alpha.hi());
    let b0 = branches
        .iter()
        .map(|b| b.distortion())
        .fold(Interval::ZERO, Interval::max);
    Ok(LyConstants { alpha, b0, source: LySource::Derived })
}
