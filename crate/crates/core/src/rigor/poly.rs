use num_rational::BigRational;
use num_traits::{One, Zero};

use super::interval::Interval;

/// Polynomial with exact rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RatPoly(pub Vec<BigRational>);

impl RatPoly {
    pub fn constant(c: BigRational) -> Self {
        RatPoly(vec![c]).trimmed()
    }

    pub fn x() -> Self {
        RatPoly(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn trimmed(mut self) -> Self {
        while self.0.len() > 1 && self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(BigRational::zero());
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let n = self.0.len().max(other.0.len());
        let z = BigRational::zero();
        RatPoly(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) + other.0.get(i).unwrap_or(&z))
                .collect(),
        )
        .trimmed()
    }

    pub fn neg(&self) -> RatPoly {
        RatPoly(self.0.iter().map(|c| -c).collect())
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly(out).trimmed()
    }

    pub fn pow(&self, n: u32) -> RatPoly {
        (0..n).fold(RatPoly::constant(BigRational::one()), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.0.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    pub fn to_interval(&self) -> Poly {
        Poly::new(self.0.iter().map(Interval::from_rational).collect())
    }
}

/// Polynomial with interval coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<Interval>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Interval>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Interval::ZERO);
        }
        Poly { coeffs }
    }

    pub fn from_f64(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Interval::point(c)).collect())
    }

    pub fn coeffs(&self) -> &[Interval] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation; encloses `{p(x) : x ∈ x}` for every choice of coefficients.
    pub fn eval(&self, x: Interval) -> Interval {
        let mut acc = *self.coeffs.last().unwrap();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * x + *c;
        }
        acc
    }

    /// Mean-value form about the midpoint, intersected with Horner. Tighter on wide arguments.
    pub fn range(&self, x: Interval) -> Interval {
        let horner = self.eval(x);
        if self.degree() < 2 || x.width() == 0.0 {
            return horner;
        }
        let c = Interval::point(x.mid());
        let mv = self.eval(c) + self.derivative().eval(x) * (x - c);
        horner.intersect(mv).unwrap_or(horner)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.mid())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::new(vec![Interval::ZERO]);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| *c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Poly {
        let mut out = vec![Interval::ZERO];
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push(c.checked_div(Interval::point((k + 1) as f64)).unwrap());
        }
        Poly::new(out)
    }

    /// Encloses `∫_a^b p` for every `a ∈ lo`, `b ∈ hi`.
    pub fn integrate(&self, lo: Interval, hi: Interval) -> Interval {
        let f = self.antiderivative();
        f.eval(hi) - f.eval(lo)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![Interval::ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += *a * *b;
            }
        }
        Poly::new(out)
    }

    pub fn square(&self) -> Poly {
        self.mul(self)
    }

    /// Polynomial `p - c`.
    pub fn shift(&self, c: Interval) -> Poly {
        let mut out = self.coeffs.clone();
        out[0] -= c;
        Poly::new(out)
    }

    /// Upper bounds of `sup |p|` and of the total variation of `p` on `[a, b]`.
    ///
    /// The domain is bisected until the derivative has a certified sign (the
    /// piece is monotone, so its variation is `|p(b) - p(a)|`) or the subinterval
    /// is short, in which case `sup|p'|·width` bounds the variation. The short
    /// leftovers are the enclosures of the critical points.
    pub fn sup_and_variation(&self, dom: Interval, tol: f64) -> (Interval, Interval) {
        let dp = self.derivative();
        let mut stack = vec![dom];
        let mut sup = Interval::ZERO;
        let mut var = Interval::ZERO;
        let mut sup_lo: f64 = 0.0;
        while let Some(x) = stack.pop() {
            sup_lo = sup_lo.max(self.eval(Interval::point(x.mid())).mig());
            let d = dp.range(x);
            if !d.contains_zero() || d.mag() == 0.0 {
                let a = self.eval(Interval::point(x.lo()));
                let b = self.eval(Interval::point(x.hi()));
                sup = sup.max(Interval::new(0.0, a.mag().max(b.mag())));
                let jump = (b - a).abs();
                var += Interval::new(jump.lo(), jump.hi());
            } else if x.width() <= tol || !(x.lo() < x.mid() && x.mid() < x.hi()) {
                sup = sup.max(Interval::new(0.0, self.range(x).mag()));
                var += Interval::new(0.0, (Interval::point(d.mag()) * Interval::point(x.width())).hi());
            } else {
                let m = x.mid();
                stack.push(Interval::new(m, x.hi()));
                stack.push(Interval::new(x.lo(), m));
            }
        }
        let sup = Interval::new(sup_lo.min(sup.hi()), sup.hi());
        let var = Interval::new(0.0, var.hi());
        (sup, var)
    }
}
