use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;

use super::interval::Interval;
use super::parse::{parse_poly, parse_rational};
use super::poly::{Poly, RatPoly};
use crate::error::{Error, Result};

/// Interval extension of a real function: must enclose `φ(X)` for every input box `X`.
pub type Extension = Arc<dyn Fn(Interval) -> Interval + Send + Sync>;

#[derive(Clone)]
pub enum PieceFn {
    /// Polynomial with interval coefficients, its antiderivative, and the exact
    /// coefficients when known. Build with [`PieceFn::poly`].
    Poly { poly: Poly, anti: Poly, exact: Option<RatPoly> },
    /// Non-polynomial piece; integrals use the crude bound `|cell|·φ(cell)`.
    Extension(Extension),
}

impl fmt::Debug for PieceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceFn::Poly { poly, .. } => write!(f, "Poly({:?})", poly.coeffs()),
            PieceFn::Extension(_) => write!(f, "Extension"),
        }
    }
}

impl PieceFn {
    pub fn poly(poly: Poly, exact: Option<RatPoly>) -> Self {
        let anti = poly.antiderivative();
        PieceFn::Poly { poly, anti, exact }
    }

    pub fn exact(exact: RatPoly) -> Self {
        PieceFn::poly(exact.to_interval(), Some(exact))
    }

    pub fn eval(&self, x: Interval) -> Interval {
        match self {
            PieceFn::Poly { poly, .. } => poly.range(x),
            PieceFn::Extension(f) => f(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Piece {
    /// Enclosures of the piece endpoints.
    pub lo: Interval,
    pub hi: Interval,
    pub f: PieceFn,
}

/// Piecewise observable on `[0, 1]` with upper bounds of `‖ψ‖∞` and `V(ψ)`.
#[derive(Clone, Debug)]
pub struct Observable {
    pieces: Vec<Piece>,
    sup_norm_bound: Interval,
    var_bound: Interval,
    label: String,
}

const CRITICAL_POINT_TOL: f64 = 1e-10;

impl Observable {
    /// Builds an observable from pieces that partition `[0, 1]` in order.
    /// Bounds are computed for polynomial pieces; extension pieces need
    /// [`Observable::with_bounds`].
    pub fn from_pieces(pieces: Vec<Piece>, label: impl Into<String>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Parse("observable has no pieces".into()));
        }
        if !pieces[0].lo.contains(0.0) || !pieces.last().unwrap().hi.contains(1.0) {
            return Err(Error::Parse("observable pieces must cover [0, 1]".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::Parse("observable pieces must be contiguous".into()));
            }
        }
        for p in &pieces {
            if p.lo.lo() >= p.hi.hi() {
                return Err(Error::Parse("observable piece with empty domain".into()));
            }
        }
        let mut obs = Observable {
            pieces,
            sup_norm_bound: Interval::new(0.0, f64::INFINITY),
            var_bound: Interval::new(0.0, f64::INFINITY),
            label: label.into(),
        };
        if obs.pieces.iter().all(|p| matches!(p.f, PieceFn::Poly { .. })) {
            let (s, v) = obs.compute_bounds();
            obs.sup_norm_bound = s;
            obs.var_bound = v;
        }
        Ok(obs)
    }

    pub fn polynomial(poly: RatPoly, label: impl Into<String>) -> Result<Self> {
        let piece = Piece {
            lo: Interval::ZERO,
            hi: Interval::ONE,
            f: PieceFn::exact(poly),
        };
        Observable::from_pieces(vec![piece], label)
    }

    /// Parses `"x^2"` or a piecewise form such as `"x on [0,1/2]; x - 1 on [1/2,1]"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        for part in s.split(';') {
            let part = part.trim();
            let (expr, dom) = match part.split_once(" on ") {
                Some((e, d)) => (e, Some(d.trim())),
                None => (part, None),
            };
            let poly = parse_poly(expr)?;
            let (lo, hi) = match dom {
                None => (BigRational::from_integer(0.into()), BigRational::from_integer(1.into())),
                Some(d) => {
                    let inner = d
                        .strip_prefix('[')
                        .and_then(|d| d.strip_suffix(']'))
                        .ok_or_else(|| Error::Parse(format!("bad piece domain {d:?}")))?;
                    let (a, b) = inner
                        .split_once(',')
                        .ok_or_else(|| Error::Parse(format!("bad piece domain {d:?}")))?;
                    (parse_rational(a)?, parse_rational(b)?)
                }
            };
            if lo >= hi {
                return Err(Error::Parse(format!("empty piece domain in {part:?}")));
            }
            pieces.push(Piece {
                lo: Interval::from_rational(&lo),
                hi: Interval::from_rational(&hi),
                f: PieceFn::exact(poly),
            });
        }
        Observable::from_pieces(pieces, s.trim())
    }

    /// Replaces the computed bounds by user-supplied upper bounds.
    pub fn with_bounds(mut self, sup_norm: f64, variation: f64) -> Self {
        self.sup_norm_bound = Interval::new(0.0, sup_norm);
        self.var_bound = Interval::new(0.0, variation);
        self
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sup_norm_bound(&self) -> Interval {
        self.sup_norm_bound
    }

    pub fn var_bound(&self) -> Interval {
        self.var_bound
    }

    fn compute_bounds(&self) -> (Interval, Interval) {
        let mut sup = Interval::ZERO;
        let mut var = Interval::ZERO;
        for p in &self.pieces {
            let PieceFn::Poly { poly, .. } = &p.f else { unreachable!() };
            let dom = Interval::new(p.lo.lo().max(0.0), p.hi.hi().min(1.0));
            let (s, v) = poly.sup_and_variation(dom, CRITICAL_POINT_TOL);
            sup = sup.max(s);
            var += v;
        }
        for w in self.pieces.windows(2) {
            let b = w[0].hi;
            let jump = (w[1].f.eval(b) - w[0].f.eval(b)).abs();
            var += Interval::new(0.0, jump.hi());
        }
        (sup, Interval::new(0.0, var.hi()))
    }

    /// Encloses `∫_cell ψ dm`. Pieces meeting the cell are integrated separately.
    pub fn integrate_cell(&self, cell: Interval) -> Interval {
        let clamp = |v: Interval| Interval::new(v.lo().clamp(cell.lo(), cell.hi()), v.hi().clamp(cell.lo(), cell.hi()));
        let mut total = Interval::ZERO;
        for p in &self.pieces {
            if p.hi.hi() <= cell.lo() || p.lo.lo() >= cell.hi() {
                continue;
            }
            let a = clamp(p.lo);
            let b = clamp(p.hi);
            total += match &p.f {
                PieceFn::Poly { anti, .. } => anti.eval(b) - anti.eval(a),
                PieceFn::Extension(f) => {
                    let len = b - a;
                    let len = Interval::new(len.lo().max(0.0), len.hi().max(0.0));
                    len * f(a.hull(b))
                }
            };
        }
        total
    }

    /// The observable `ψ²`.
    pub fn squared(&self) -> Observable {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                f: match &p.f {
                    PieceFn::Poly { poly, exact, .. } => PieceFn::poly(poly.square(), exact.as_ref().map(|e| e.mul(e))),
                    PieceFn::Extension(f) => {
                        let f = f.clone();
                        PieceFn::Extension(Arc::new(move |x| f(x).square()))
                    }
                },
            })
            .collect();
        let s = self.sup_norm_bound.square();
        let var = Interval::point(2.0) * self.sup_norm_bound * self.var_bound;
        Observable {
            pieces,
            sup_norm_bound: Interval::new(0.0, s.hi()),
            var_bound: Interval::new(0.0, var.hi()),
            label: format!("({})^2", self.label),
        }
    }

    /// Exact coefficients of every piece, if all pieces are polynomials with known rationals.
    pub fn exact_pieces(&self) -> Option<Vec<(Interval, Interval, RatPoly)>> {
        self.pieces
            .iter()
            .map(|p| match &p.f {
                PieceFn::Poly { exact: Some(e), .. } => Some((p.lo, p.hi, e.clone())),
                _ => None,
            })
            .collect()
    }

    /// Point evaluation in f64, for diagnostics.
    pub fn eval_f64(&self, x: f64) -> f64 {
        let p = self
            .pieces
            .iter()
            .find(|p| x <= p.hi.mid())
            .unwrap_or_else(|| self.pieces.last().unwrap());
        p.f.eval(Interval::point(x)).mid()
    }
}
