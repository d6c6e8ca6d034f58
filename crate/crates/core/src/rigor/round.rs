//! Directed rounding of single f64 operations.
//!
//! Each operation is computed in round-to-nearest and its exact error term is
//! recovered with an error-free transformation (TwoSum, FMA). The result is then
//! nudged by one ulp only when the error has the wrong sign, so exact operations
//! stay exact. Near the underflow threshold the error terms are no longer exact
//! and the nudge becomes unconditional.

// Below this magnitude the FMA residual may itself be rounded.
const TINY: f64 = 1.0e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return if s == f64::INFINITY && a.is_finite() && b.is_finite() { f64::MAX } else { s };
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return if s == f64::NEG_INFINITY && a.is_finite() && b.is_finite() { f64::MIN } else { s };
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return if p == f64::INFINITY && a.is_finite() && b.is_finite() { f64::MAX } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return if p == f64::NEG_INFINITY && a.is_finite() && b.is_finite() { f64::MIN } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < TINY {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Sign of `a/b - q` where `q = fl(a/b)`, or `None` when the residual is unreliable.
#[inline]
fn div_err_sign(a: f64, b: f64, q: f64) -> Option<f64> {
    if q == 0.0 || q.abs() < TINY || a.abs() < TINY || !q.is_finite() {
        return None;
    }
    let r = (-q).mul_add(b, a);
    Some(r * b.signum())
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if a == 0.0 && b != 0.0 {
        return q;
    }
    match div_err_sign(a, b, q) {
        Some(e) if e < 0.0 => q.next_down(),
        Some(_) => q,
        None if q.is_finite() => q.next_down(),
        None => q,
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if a == 0.0 && b != 0.0 {
        return q;
    }
    match div_err_sign(a, b, q) {
        Some(e) if e > 0.0 => q.next_up(),
        Some(_) => q,
        None if q.is_finite() => q.next_up(),
        None => q,
    }
}

#[inline]
pub fn sqrt_down(a: f64) -> f64 {
    let s = a.sqrt();
    if a == 0.0 || !s.is_finite() {
        return s;
    }
    if a < TINY {
        return s.next_down().max(0.0);
    }
    if (-s).mul_add(s, a) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    let s = a.sqrt();
    if a == 0.0 || !s.is_finite() {
        return s;
    }
    if a < TINY {
        return s.next_up();
    }
    if (-s).mul_add(s, a) > 0.0 {
        s.next_up()
    } else {
        s
    }
}
