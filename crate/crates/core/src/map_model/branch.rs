use crate::error::{Error, Result};
use crate::rigor::{Interval, Poly, RatPoly};

/// Number of subintervals used to certify derivative ranges.
const DERIVATIVE_GRID: usize = 256;

/// One monotone C² piece of an interval map.
#[derive(Clone, Debug)]
pub struct Branch {
    lo: Interval,
    hi: Interval,
    forward: Poly,
    derivative: Poly,
    second: Poly,
    exact: Option<RatPoly>,
    increasing: bool,
    min_slope: f64,
    /// Enclosures of the image endpoints, lower then upper, clipped to `[0, 1]`.
    image_ends: (Interval, Interval),
}

impl Branch {
    /// Builds a branch on the domain with endpoint enclosures `lo`, `hi`.
    ///
    /// Certifies that `T'` has a constant sign with `|T'| > 1` on `[lo.lo, hi.hi]`
    /// and that the image meets `[0, 1]`.
    pub fn new(lo: Interval, hi: Interval, forward: Poly, exact: Option<RatPoly>) -> Result<Self> {
        if lo.hi() >= hi.lo() {
            return Err(Error::InvalidMap(format!("empty branch domain {lo} .. {hi}")));
        }
        let derivative = forward.derivative();
        let second = derivative.derivative();
        let hull = Interval::new(lo.lo(), hi.hi());
        let d = derivative_range(&derivative, hull);
        if d.contains_zero() {
            return Err(Error::InvalidMap(format!("branch on {hull} is not monotone: T' in {d}")));
        }
        let min_slope = d.mig();
        if min_slope <= 1.0 {
            return Err(Error::InvalidMap(format!("branch on {hull} is not expanding: inf|T'| = {min_slope}")));
        }
        let increasing = d.lo() > 0.0;
        let (ya, yb) = (forward.eval(lo), forward.eval(hi));
        let (ylo, yhi) = if increasing { (ya, yb) } else { (yb, ya) };
        let clip = |y: Interval| y.intersect(Interval::UNIT);
        let (Some(ylo), Some(yhi)) = (clip(ylo), clip(yhi)) else {
            return Err(Error::InvalidMap(format!("branch on {hull} maps outside [0, 1]")));
        };
        Ok(Branch {
            lo,
            hi,
            forward,
            derivative,
            second,
            exact,
            increasing,
            min_slope,
            image_ends: (ylo, yhi),
        })
    }

    pub fn from_rational(lo: Interval, hi: Interval, poly: RatPoly) -> Result<Self> {
        Branch::new(lo, hi, poly.to_interval(), Some(poly))
    }

    pub fn domain_lo(&self) -> Interval {
        self.lo
    }

    pub fn domain_hi(&self) -> Interval {
        self.hi
    }

    /// Hull of the domain enclosure.
    pub fn domain(&self) -> Interval {
        Interval::new(self.lo.lo(), self.hi.hi())
    }

    pub fn forward(&self) -> &Poly {
        &self.forward
    }

    pub fn derivative(&self) -> &Poly {
        &self.derivative
    }

    pub fn exact(&self) -> Option<&RatPoly> {
        self.exact.as_ref()
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    /// Certified lower bound of `|T'|` on the domain.
    pub fn min_slope(&self) -> f64 {
        self.min_slope
    }

    pub fn image(&self) -> Interval {
        self.image_ends.0.hull(self.image_ends.1)
    }

    pub fn image_ends(&self) -> (Interval, Interval) {
        self.image_ends
    }

    /// Whether the image certainly reaches both 0 and 1.
    pub fn is_onto(&self) -> bool {
        self.image_ends.0.contains(0.0) && self.image_ends.1.contains(1.0)
    }

    /// Upper bound of `|T''| / T'^2` on the domain.
    pub fn distortion(&self) -> Interval {
        let hull = self.domain();
        let mut worst: f64 = 0.0;
        for x in grid(hull, DERIVATIVE_GRID) {
            let num = self.second.range(x).abs();
            let den = self.derivative.range(x).square();
            let q = num.checked_div(den).expect("derivative bounded away from zero");
            worst = worst.max(q.hi());
        }
        Interval::new(0.0, worst)
    }

    /// Certified enclosure of `T'` over the domain.
    pub fn derivative_range(&self) -> Interval {
        derivative_range(&self.derivative, self.domain())
    }

    /// Encloses every `x` in the domain with `T(x) ∈ y`; `None` when `y` misses the image.
    pub fn invert(&self, y: Interval) -> Option<Interval> {
        let y = y.intersect(self.image())?;
        let a = self.invert_point(y.lo());
        if y.lo() == y.hi() {
            return Some(a);
        }
        Some(a.hull(self.invert_point(y.hi())))
    }

    /// Encloses the unique `x` in the domain with `T(x) = y`, or the domain end
    /// nearest to it when `y` may fall outside the image.
    pub fn invert_point(&self, y: f64) -> Interval {
        let hull = self.domain();
        self.invert_point_near(y, hull.lo(), hull.hi())
    }

    /// As [`Branch::invert_point`], with `[a, b]` a likely (unverified) bracket of the root.
    pub fn invert_point_near(&self, y: f64, a: f64, b: f64) -> Interval {
        let hull = self.domain();
        let x0 = self.newton_guess(y, a.max(hull.lo()), b.min(hull.hi()));
        let yi = Interval::point(y);
        // s(x) = ±(T(x) - y) is increasing; look for certified s(l) < 0 < s(r).
        let s = |x: f64| {
            let v = self.forward.eval(Interval::point(x)) - yi;
            if self.increasing { v } else { -v }
        };
        let below = |x: f64| s(x).hi() < 0.0;
        let above = |x: f64| s(x).lo() > 0.0;
        let scale = x0.abs().max(f64::MIN_POSITIVE);
        let mut left = hull.lo();
        let mut right = hull.hi();
        let mut delta = 4.0 * f64::EPSILON * scale;
        while delta < hull.width() {
            let l = x0 - delta;
            if l <= hull.lo() {
                break;
            }
            if below(l) {
                left = l;
                break;
            }
            delta *= 8.0;
        }
        let mut delta = 4.0 * f64::EPSILON * scale;
        while delta < hull.width() {
            let r = x0 + delta;
            if r >= hull.hi() {
                break;
            }
            if above(r) {
                right = r;
                break;
            }
            delta *= 8.0;
        }
        let mut x = Interval::new(left, right.max(left));
        // Verified bisection when the bracket stayed wide.
        while x.width() > 1e-6 * hull.width().max(1e-300) {
            let m = x.mid();
            if !(x.lo() < m && m < x.hi()) {
                break;
            }
            if below(m) {
                x = Interval::new(m, x.hi());
            } else if above(m) {
                x = Interval::new(x.lo(), m);
            } else {
                break;
            }
        }
        self.newton_refine(x, y)
    }

    fn newton_guess(&self, y: f64, a: f64, b: f64) -> f64 {
        let hull = self.domain();
        let f = |x: f64| self.forward.eval_f64(x) - y;
        let (mut a, mut b) = (a, b);
        let (fa, fb) = (f(a), f(b));
        if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 && (a > hull.lo() || b < hull.hi()) {
            return self.newton_guess(y, hull.lo(), hull.hi());
        }
        if fa == 0.0 {
            return a;
        }
        if fb == 0.0 {
            return b;
        }
        if fa.signum() == fb.signum() {
            return if fa.abs() < fb.abs() { a } else { b };
        }
        let mut x = a + (b - a) * fa / (fa - fb);
        for _ in 0..60 {
            let fx = f(x);
            if fx == 0.0 {
                return x;
            }
            if fx.signum() == fa.signum() {
                a = x;
            } else {
                b = x;
            }
            let dx = fx / self.derivative.eval_f64(x);
            let nx = x - dx;
            x = if nx > a && nx < b { nx } else { 0.5 * (a + b) };
            if dx.abs() <= 2.0 * f64::EPSILON * x.abs() || b - a <= 2.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        x.clamp(hull.lo(), hull.hi())
    }

    /// One or two interval-Newton contractions of a bracket known to contain the root.
    fn newton_refine(&self, mut x: Interval, y: f64) -> Interval {
        for _ in 0..2 {
            let m = Interval::point(x.mid());
            let fm = self.forward.eval(m) - Interval::point(y);
            let dx = self.derivative.eval(x);
            let Ok(step) = fm.checked_div(dx) else { return x };
            match x.intersect(m - step) {
                Some(n) if n.width() < x.width() => x = n,
                Some(n) => {
                    x = n;
                    break;
                }
                // Root outside the domain: keep the bracket, the caller clamps it.
                None => break,
            }
        }
        x
    }
}

fn grid(x: Interval, n: usize) -> impl Iterator<Item = Interval> {
    let (a, w) = (x.lo(), x.hi() - x.lo());
    (0..n).map(move |i| {
        let l = if i == 0 { x.lo() } else { (a + w * i as f64 / n as f64).next_down() };
        let r = if i + 1 == n { x.hi() } else { (a + w * (i + 1) as f64 / n as f64).next_up() };
        Interval::new(l.max(x.lo()), r.min(x.hi()))
    })
}

fn derivative_range(d: &Poly, hull: Interval) -> Interval {
    grid(hull, DERIVATIVE_GRID)
        .map(|x| d.range(x))
        .reduce(Interval::hull)
        .unwrap()
}
