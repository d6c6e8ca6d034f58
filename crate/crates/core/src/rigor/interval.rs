use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::round::*;
use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with f64 endpoints, rounded outward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    /// Builds `[lo, hi]`. Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Self> {
        if lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Tightest enclosure of an exact rational.
    pub fn from_rational(q: &BigRational) -> Self {
        let x = q.to_f64().unwrap_or(f64::NAN);
        if !x.is_finite() {
            return if q.is_negative() {
                Interval::new(f64::NEG_INFINITY, f64::MIN)
            } else {
                Interval::new(f64::MAX, f64::INFINITY)
            };
        }
        match BigRational::from_float(x) {
            Some(qx) if &qx == q => Interval::point(x),
            Some(qx) if &qx < q => Interval::new(x, x.next_up()),
            _ => Interval::new(x.next_down(), x),
        }
    }

    /// Enclosure of `num/den` for integers.
    pub fn ratio(num: i64, den: i64) -> Self {
        Interval::point(num as f64)
            .checked_div(Interval::point(den as f64))
            .expect("nonzero denominator")
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    /// Midpoint, not necessarily exact.
    pub fn mid(self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Upper bound of the radius about `mid()`.
    pub fn rad(self) -> f64 {
        let m = self.mid();
        sub_up(self.hi, m).max(sub_up(m, self.lo))
    }

    pub fn width(self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn mig(self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    pub fn subset_of(self, other: Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn overlaps(self, other: Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval { lo: 0.0, hi: self.mag() }
        }
    }

    pub fn max(self, other: Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn min(self, other: Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.min(other.hi) }
    }

    /// Widens by `r` on both sides (outward).
    pub fn inflate(self, r: f64) -> Interval {
        Interval { lo: sub_down(self.lo, r), hi: add_up(self.hi, r) }
    }

    pub fn square(self) -> Interval {
        let a = self.abs();
        Interval { lo: mul_down(a.lo, a.lo), hi: mul_up(a.hi, a.hi) }
    }

    pub fn powi(self, n: u32) -> Interval {
        match n {
            0 => Interval::ONE,
            1 => self,
            _ if n.is_multiple_of(2) => self.square().powi(n / 2),
            _ => self * self.powi(n - 1),
        }
    }

    pub fn checked_div(self, rhs: Interval) -> Result<Interval> {
        if rhs.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        let c = [
            (div_down(self.lo, rhs.lo), div_up(self.lo, rhs.lo)),
            (div_down(self.lo, rhs.hi), div_up(self.lo, rhs.hi)),
            (div_down(self.hi, rhs.lo), div_up(self.hi, rhs.lo)),
            (div_down(self.hi, rhs.hi), div_up(self.hi, rhs.hi)),
        ];
        Ok(Interval {
            lo: c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            hi: c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        })
    }

    pub fn recip(self) -> Result<Interval> {
        Interval::ONE.checked_div(self)
    }

    pub fn sqrt(self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of [{}, {}]", self.lo, self.hi)));
        }
        Ok(Interval { lo: sqrt_down(self.lo), hi: sqrt_up(self.hi) })
    }

    /// Product with a nonnegative interval, skipping the sign cases of `self`'s partner.
    #[inline]
    pub fn mul_nonneg(self, p_lo: f64, p_hi: f64) -> Interval {
        debug_assert!(0.0 <= p_lo && p_lo <= p_hi);
        let lo = if self.lo >= 0.0 { mul_down(self.lo, p_lo) } else { mul_down(self.lo, p_hi) };
        let hi = if self.hi >= 0.0 { mul_up(self.hi, p_hi) } else { mul_up(self.hi, p_lo) };
        Interval { lo, hi }
    }

    /// Upper bound of the distance from any point of `self` to `x`.
    pub fn dist_sup(self, x: f64) -> f64 {
        sub_up(self.hi, x).max(sub_up(x, self.lo))
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: add_down(self.lo, rhs.lo), hi: add_up(self.hi, rhs.hi) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: sub_down(self.lo, rhs.hi), hi: sub_up(self.hi, rhs.lo) }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        if a.lo >= 0.0 && b.lo >= 0.0 {
            return Interval { lo: mul_down(a.lo, b.lo), hi: mul_up(a.hi, b.hi) };
        }
        let lo = mul_down(a.lo, b.lo)
            .min(mul_down(a.lo, b.hi))
            .min(mul_down(a.hi, b.lo))
            .min(mul_down(a.hi, b.hi));
        let hi = mul_up(a.lo, b.lo)
            .max(mul_up(a.lo, b.hi))
            .max(mul_up(a.hi, b.lo))
            .max(mul_up(a.hi, b.hi));
        Interval { lo, hi }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, rhs: f64) -> Interval {
        self - Interval::point(rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl AddAssign for Interval {
    fn add_assign(&mut self, rhs: Interval) {
        *self = *self + rhs;
    }
}

impl SubAssign for Interval {
    fn sub_assign(&mut self, rhs: Interval) {
        *self = *self - rhs;
    }
}

impl Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

/// Enclosure of `x·2^k` for an exact power of two scaling.
pub fn scale_pow2(x: Interval, k: i32) -> Interval {
    let s = 2f64.powi(k);
    Interval { lo: mul_down(x.lo, s), hi: mul_up(x.hi, s) }
}

/// Exact rational value of a finite f64.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}
