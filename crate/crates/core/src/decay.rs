//! Decay of correlations on zero-mean BV functions.
//!
//! A contraction `‖P_ε^{n₁} g‖₁ ≤ α₂ ‖g‖₁` on step functions of zero mean is
//! certified at a (coarse) mesh, then transferred to the true operator through
//! the 2×2 norm system
//!
//! ```text
//! (‖P^{(i+1)n₁}g‖_BV, ‖P^{(i+1)n₁}g‖₁) ⪯ 𝓜 (‖P^{in₁}g‖_BV, ‖P^{in₁}g‖₁)
//! ```
//!
//! whose dominant eigenvalue `ρ*` gives `‖P^{kn₁}g‖₁ ≤ C* ρ*^k ‖g‖_BV`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{ly_b_sum, perturbed_iterate_bound};
use crate::error::{Error, Result};
use crate::map_model::LyConstants;
use crate::rigor::round::{add_down, add_up, div_down, div_up, mul_up, sub_down, sub_up};
use crate::rigor::Interval;
use crate::ulam::{RowView, UlamOperator};

/// Certified L¹ contraction of `P_ε` on zero-mean step functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionProfile {
    pub log2_d: u32,
    pub n1: usize,
    /// The requested `α₂`; the certificate guarantees `alpha2_achieved ≤ alpha2_target`.
    pub alpha2_target: f64,
    pub alpha2_achieved: f64,
    /// `c[n]` bounds `‖P_ε^n g‖₁ / ‖g‖₁` over zero-mean step functions, `n = 0..=n1`.
    pub c: Vec<f64>,
    /// `‖π P_ε - π‖₁` for the floating reference vector `π`.
    pub drift: f64,
    /// Upper bound of the L¹ operator norm of `P_ε`.
    pub row_sum: f64,
}

/// A (BV, L¹) pair of norm bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    pub bv: Interval,
    pub l1: Interval,
}

impl NormPair {
    /// One step of the norm system: `x ↦ 𝓜 x`.
    pub fn step(self, m: &Matrix2) -> NormPair {
        NormPair {
            bv: m[0][0] * self.bv + m[0][1] * self.l1,
            l1: m[1][0] * self.bv + m[1][1] * self.l1,
        }
    }
}

pub type Matrix2 = [[Interval; 2]; 2];

/// Dominant eigen data of a nonnegative 2×2 matrix.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Eigen {
    /// Lower end: the exact spectral radius; upper end: the certified rate `ρ_p`.
    pub rho: Interval,
    /// Enclosure of the normalized left eigenvector.
    pub a: Interval,
    pub b: Interval,
    /// Point vector with `(a_p, b_p) 𝓜 ⪯ ρ.hi (a_p, b_p)`, verified in outward arithmetic.
    pub a_point: f64,
    pub b_point: f64,
    /// `(a_p + b_p) / b_p`, so that `‖P^{kn₁}g‖₁ ≤ C* ρ^k ‖g‖_BV`.
    pub c_star: Interval,
}

/// Everything needed to bound correlations of the true operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub n1: usize,
    pub alpha2: Interval,
    pub cert_mesh_log2: u32,
    pub m: Matrix2,
    pub rho_star: Interval,
    pub a: Interval,
    pub b: Interval,
    pub a_point: f64,
    pub b_point: f64,
    pub c_star: Interval,
    pub ly: LyConstants,
    pub profile: ContractionProfile,
}

/// Finds the smallest `n₁ ≤ n_max` with `‖P_ε^{n₁} g‖₁ ≤ α₂ ‖g‖₁` for all zero-mean `g`.
///
/// Every zero-mean step vector of L¹ norm 1 is a convex combination of
/// `(e_i - e_j)/2`, and `‖(e_i - e_j)P^n‖₁/2 ≤ max_i ‖e_i P^n - π‖₁` for any `π`.
/// Each `e_i P_ε^n` is iterated in interval arithmetic against a floating
/// approximation `π` of the stationary vector. A generator that reaches
/// `α₂` early is extended with `‖(u - π)P‖₁ ≤ ρ_P ‖u - π‖₁ + ‖πP - π‖₁`.
pub fn certify_contraction(p: &UlamOperator, alpha2_target: Interval, n_max: usize) -> Result<ContractionProfile> {
    let target = alpha2_target.lo();
    if !(alpha2_target.hi() < 1.0) || target < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha2 target {alpha2_target} must lie in [0, 1)")));
    }
    let d = p.d();
    let mesh = p.mesh();
    let (pi, _, _) = p.power_iterate(1e-15, 2000.max(20 * mesh.log2_d() as usize));
    let pi_total = pi.iter().fold(0.0, |s, &x| add_up(s, x));
    let drift = {
        let v = crate::ulam::BasisVector::new(pi.iter().map(|&x| Interval::point(x)).collect());
        let w = p.apply(&v)?;
        w.coeffs().iter().zip(&pi).fold(0.0, |s, (c, &x)| add_up(s, c.dist_sup(x)))
    };
    let row_sum = p.max_row_sum().max(1.0);
    // Early exit keeps enough room for the extension up to n_max.
    let growth = pow_up(row_sum, n_max);
    let stop = sub_down(div_down(target, growth), mul_up(mul_up(drift, n_max as f64), growth));
    if n_max == 0 || (stop < 0.0 && target > 0.0) || (target == 0.0 && drift > 0.0) {
        return Err(Error::CertificationFailed { n_max, best: 1.0 });
    }
    let rows = p.to_rows();
    let runs: Vec<GeneratorRun> = (0..d)
        .into_par_iter()
        .map_init(
            || Workspace::new(d),
            |ws, i| ws.run(p, &rows, &pi, pi_total, i, stop, n_max),
        )
        .collect();
    if let Some(bad) = runs.iter().find(|r| r.hit.is_none()) {
        let best = bad.bounds.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::CertificationFailed { n_max, best });
    }
    let n1 = runs.iter().map(|r| r.hit.unwrap()).max().unwrap();
    let mut c = vec![1.0];
    for n in 1..=n1 {
        let worst = runs
            .iter()
            .map(|r| r.extended(n, row_sum, drift))
            .fold(0.0, f64::max);
        c.push(worst.min(pow_up(row_sum, n)));
    }
    let achieved = c[n1];
    if achieved > target {
        return Err(Error::CertificationFailed { n_max, best: achieved });
    }
    Ok(ContractionProfile {
        log2_d: mesh.log2_d(),
        n1,
        alpha2_target: target,
        alpha2_achieved: achieved,
        c,
        drift,
        row_sum,
    })
}

/// [`certify_contraction`] with an optional JSON cache of the resulting profile.
///
/// Profiles are keyed by map hash, mesh, target and step limit. A cached
/// profile is trusted as written; delete the file to force recomputation.
pub fn certify_contraction_cached(
    p: &UlamOperator,
    map_hash: u64,
    alpha2_target: Interval,
    n_max: usize,
    dir: Option<&std::path::Path>,
) -> Result<ContractionProfile> {
    let Some(dir) = dir else {
        return certify_contraction(p, alpha2_target, n_max);
    };
    let path = dir.join(format!(
        "{map_hash:016x}_{}_contraction_{:016x}_{n_max}.json",
        p.mesh().log2_d(),
        alpha2_target.lo().to_bits()
    ));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(prof) = serde_json::from_str::<ContractionProfile>(&text) {
            if prof.log2_d == p.mesh().log2_d() && prof.c.len() == prof.n1 + 1 {
                return Ok(prof);
            }
        }
    }
    let prof = certify_contraction(p, alpha2_target, n_max)?;
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string(&prof).map_err(|e| Error::Cache(e.to_string()))?;
    std::fs::write(&path, json)?;
    Ok(prof)
}

struct GeneratorRun {
    hit: Option<usize>,
    /// `bounds[n - 1]` bounds `‖e_i P_ε^n - π‖₁`.
    bounds: Vec<f64>,
}

impl GeneratorRun {
    fn extended(&self, n: usize, row_sum: f64, drift: f64) -> f64 {
        let h = self.hit.unwrap();
        if n <= h {
            return self.bounds[n - 1];
        }
        let mut b = self.bounds[h - 1];
        for _ in h..n {
            b = add_up(mul_up(b, row_sum), drift);
        }
        b
    }
}

struct Workspace {
    u: Vec<Interval>,
    next: Vec<Interval>,
    mark: Vec<bool>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Workspace { u: vec![Interval::ZERO; d], next: vec![Interval::ZERO; d], mark: vec![false; d] }
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        p: &UlamOperator,
        rows: &RowView,
        pi: &[f64],
        pi_total: f64,
        i: usize,
        stop: f64,
        n_max: usize,
    ) -> GeneratorRun {
        let d = p.d();
        self.u.iter_mut().for_each(|x| *x = Interval::ZERO);
        self.next.iter_mut().for_each(|x| *x = Interval::ZERO);
        self.u[i] = Interval::ONE;
        let mut support = vec![i as u32];
        let mut dense = false;
        let mut bounds = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            if !dense && support.len() * 8 < d {
                // Scatter over rows in ascending order: the same summation order as the gather.
                let mut touched = Vec::with_capacity(support.len() * 4);
                for &k in &support {
                    let uk = self.u[k as usize];
                    for (j, (lo, hi)) in rows.row(k as usize) {
                        self.next[j] += uk.mul_nonneg(lo, hi);
                        if !self.mark[j] {
                            self.mark[j] = true;
                            touched.push(j as u32);
                        }
                    }
                    self.u[k as usize] = Interval::ZERO;
                }
                touched.sort_unstable();
                for &j in &touched {
                    self.mark[j as usize] = false;
                }
                support = touched;
                std::mem::swap(&mut self.u, &mut self.next);
            } else {
                dense = true;
                p.apply_seq_into(&self.u, &mut self.next);
                std::mem::swap(&mut self.u, &mut self.next);
            }
            let dist = if dense {
                self.u.iter().zip(pi).fold(0.0, |s, (c, &x)| add_up(s, c.dist_sup(x)))
            } else {
                let (mut on, mut pi_on) = (0.0, 0.0);
                for &j in &support {
                    on = add_up(on, self.u[j as usize].dist_sup(pi[j as usize]));
                    pi_on = add_down(pi_on, pi[j as usize]);
                }
                add_up(on, sub_up(pi_total, pi_on).max(0.0))
            };
            bounds.push(dist);
            if dist <= stop {
                return GeneratorRun { hit: Some(n), bounds };
            }
        }
        GeneratorRun { hit: None, bounds }
    }
}

fn pow_up(x: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, _| mul_up(acc, x))
}

/// The norm-system matrix relating the true operator to the certified contraction.
///
/// With `M = 1` (both `P` and `P_ε` are L¹ contractions) and `B_k = B₀(1 - α^k)/(1 - α)`:
///
/// ```text
/// 𝓜 = [ α^{n₁}                     B_{n₁}                                ]
///     [ ε(1+α)(1-α^{n₁})/(1-α)      α₂ + ε(B₀ n₁ + (1+α) Σ_{k<n₁} B_k)      ]
/// ```
///
/// The first coordinate is the variation, the second the L¹ norm; row 2 is
/// [`perturbed_iterate_bound`] plus the contraction `α₂`.
pub fn build_m(ly: &LyConstants, n1: usize, alpha2: Interval, eps: Interval) -> Matrix2 {
    let a = ly.alpha;
    let an = a.powi(n1 as u32);
    let m12 = ly.b0_over_gap() * (Interval::ONE - an);
    let m21 = perturbed_iterate_bound(ly, eps, n1, Interval::ONE, Interval::ZERO);
    let m22 = perturbed_iterate_bound(ly, eps, n1, Interval::ZERO, Interval::ONE) + alpha2;
    let nonneg = |x: Interval| Interval::new(x.lo().max(0.0), x.hi().max(0.0));
    [[nonneg(an), nonneg(m12)], [nonneg(m21), nonneg(m22)]]
}

/// Dominant eigenvalue and left eigenvector of a nonnegative 2×2 matrix.
///
/// The returned rate `rho.hi()` is certified through a point vector `(a_p, b_p)`
/// with `(a_p, b_p) 𝓜 ⪯ ρ (a_p, b_p)`, checked column by column in outward arithmetic.
pub fn dominant_eigen(m: &Matrix2) -> Result<Eigen> {
    let [[m11, m12], [m21, m22]] = *m;
    let diff = m11 - m22;
    let disc = diff.square() + Interval::point(4.0) * m12 * m21;
    let disc = Interval::new(disc.lo().max(0.0), disc.hi().max(0.0));
    let rho = crate::rigor::interval::scale_pow2(m11 + m22 + disc.sqrt()?, -1);
    let (a, b) = left_eigvec(m, rho);
    let mut candidates = vec![(a.mid(), b.mid())];
    candidates.extend([0.5, 0.1, 0.01, 0.001].iter().map(|&t| (1.0 - t, t)));
    candidates.push((0.5, 0.5));
    let mut best: Option<(f64, f64, f64, Interval)> = None;
    for (ap, bp) in candidates {
        let Some(r) = certified_rate(m, ap, bp) else { continue };
        if bp <= 0.0 {
            continue;
        }
        let c_star = (Interval::point(ap) + Interval::point(bp)).checked_div(Interval::point(bp))?;
        // Prefer the smallest rate, then the smallest constant.
        let better = match best {
            None => true,
            Some((r0, _, _, c0)) => r < r0 || (r == r0 && c_star.hi() < c0.hi()),
        };
        if better {
            best = Some((r, ap, bp, c_star));
        }
    }
    let Some((r, ap, bp, c_star)) = best else {
        return Err(Error::NoSpectralGap(rho.hi()));
    };
    if !(r < 1.0) {
        return Err(Error::NoSpectralGap(r));
    }
    Ok(Eigen { rho: Interval::new(rho.lo().min(r), r), a, b, a_point: ap, b_point: bp, c_star })
}

/// Same as [`dominant_eigen`] but keeping the exact eigenvector even when `b = 0`.
pub fn left_eigvec(m: &Matrix2, rho: Interval) -> (Interval, Interval) {
    let [[m11, m12], [m21, m22]] = *m;
    let norm = |t: Interval| {
        let s = Interval::ONE + t;
        (t.checked_div(s).unwrap(), Interval::ONE.checked_div(s).unwrap())
    };
    let g1 = rho - m11;
    let g2 = rho - m22;
    if g1.lo() > 0.0 {
        // a (m11 - ρ) + b m21 = 0: a/b = m21 / (ρ - m11).
        let t = m21.checked_div(g1).unwrap();
        norm(Interval::new(t.lo().max(0.0), t.hi().max(0.0)))
    } else if g2.lo() > 0.0 {
        // a m12 + b (m22 - ρ) = 0: b/a = m12 / (ρ - m22).
        let t = m12.checked_div(g2).unwrap();
        let (b, a) = norm(Interval::new(t.lo().max(0.0), t.hi().max(0.0)));
        (a, b)
    } else if m21.hi() == 0.0 && m11.hi() <= m22.lo() {
        (Interval::ZERO, Interval::ONE)
    } else {
        (Interval::UNIT, Interval::UNIT)
    }
}

/// `max_j ((a,b)𝓜)_j / (a,b)_j` rounded up; components with zero weight must map to zero.
fn certified_rate(m: &Matrix2, a: f64, b: f64) -> Option<f64> {
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
        return None;
    }
    let [[m11, m12], [m21, m22]] = *m;
    let col = |x: Interval, y: Interval, w: f64| -> Option<f64> {
        let lhs = add_up(mul_up(a, x.hi()), mul_up(b, y.hi()));
        if w > 0.0 {
            Some(div_up(lhs, w))
        } else if lhs <= 0.0 {
            Some(0.0)
        } else {
            None
        }
    };
    Some(col(m11, m21, a)?.max(col(m12, m22, b)?))
}

/// Certifies the contraction at `p`'s mesh and assembles the full certificate.
pub fn certify_decay(ly: &LyConstants, p: &UlamOperator, alpha2_target: Interval, n_max: usize) -> Result<DecayCertificate> {
    let profile = certify_contraction(p, alpha2_target, n_max)?;
    decay_from_profile(ly, profile)
}

/// Builds `𝓜` and its eigen data from a contraction profile, using the achieved `α₂`.
pub fn decay_from_profile(ly: &LyConstants, profile: ContractionProfile) -> Result<DecayCertificate> {
    let mesh = crate::ulam::Mesh::new(profile.log2_d)?;
    let alpha2 = Interval::point(profile.alpha2_achieved);
    let m = build_m(ly, profile.n1, alpha2, mesh.eps());
    let e = dominant_eigen(&m)?;
    Ok(DecayCertificate {
        n1: profile.n1,
        alpha2,
        cert_mesh_log2: profile.log2_d,
        m,
        rho_star: e.rho,
        a: e.a,
        b: e.b,
        a_point: e.a_point,
        b_point: e.b_point,
        c_star: e.c_star,
        ly: *ly,
        profile,
    })
}

/// Bounds `(V(ψ̂h), ‖ψ̂h‖₁)` for the centered observable against the invariant density:
/// `‖ψ̂h‖₁ ≤ 2‖ψ‖_∞` and `V(ψ̂h) ≤ 2‖ψ‖_∞ B₀/(1-α) + V(ψ)(B₀+1-α)/(1-α)`.
pub fn psi_h_norms(ly: &LyConstants, psi_sup: Interval, psi_var: Interval) -> NormPair {
    let l1 = Interval::point(2.0) * psi_sup;
    let h_sup = Interval::ONE + ly.b0_over_gap();
    NormPair { bv: l1 * ly.b0_over_gap() + psi_var * h_sup, l1 }
}

/// Tail of the correlation sum beyond `l`, with `K = ⌈l / n₁⌉`:
///
/// ```text
/// 4‖ψ‖_∞ Σ_{i ≥ K n₁} ‖P^i(ψ̂h)‖₁
///   ≤ 4‖ψ‖_∞ ρ^K/(1-ρ) Σ_{r<n₁} ((a/b) V(P^r ψ̂h) + ‖P^r ψ̂h‖₁)
/// ```
///
/// using `(a,b)𝓜 ⪯ ρ(a,b)` on each shifted sequence `P^{kn₁}(P^r ψ̂h)`, and
/// `V(P^r g) ≤ α^r V(g) + B_r ‖g‖₁`.
pub fn tail_bound(cert: &DecayCertificate, psi_sup: Interval, psi_var: Interval, l: usize) -> Interval {
    let n1 = cert.n1.max(1);
    let k = l.div_ceil(n1) as u32;
    let ly = &cert.ly;
    let g = psi_h_norms(ly, psi_sup, psi_var);
    let geo_alpha = (Interval::ONE - ly.alpha.powi(n1 as u32)).checked_div(ly.one_minus_alpha()).expect("alpha < 1");
    let v_sum = g.bv * geo_alpha + g.l1 * ly_b_sum(ly, n1);
    let ratio = Interval::point(cert.a_point).checked_div(Interval::point(cert.b_point)).expect("b > 0");
    let shifted = ratio * v_sum + Interval::point(n1 as f64) * g.l1;
    let rho = Interval::new(0.0, cert.rho_star.hi());
    let geo = rho.powi(k).checked_div(Interval::ONE - rho).expect("rho < 1");
    let t = Interval::point(4.0) * psi_sup * shifted * geo;
    Interval::new(t.lo().max(0.0), t.hi())
}

/// Truncation length chosen by [`select_l_star`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LStar {
    pub l_star: usize,
    pub k: usize,
    /// Closed-form starting guess for `k`.
    pub seed_k: usize,
    pub tail: Interval,
}

/// Smallest multiple `l* = k n₁` with `tail_bound(l*) ≤ tau_share`.
pub fn select_l_star(cert: &DecayCertificate, psi_sup: Interval, psi_var: Interval, tau_share: f64) -> Result<LStar> {
    if !(tau_share > 0.0) {
        return Err(Error::InvalidArgument(format!("tau share {tau_share} must be positive")));
    }
    let n1 = cert.n1.max(1);
    let tail = |k: usize| tail_bound(cert, psi_sup, psi_var, k * n1);
    let rho = cert.rho_star.hi();
    let at_one = tail(1).hi();
    let seed_k = if at_one <= tau_share || rho <= 0.0 {
        1
    } else {
        // tail(k) = tail(1) ρ^{k-1}.
        let k = 1.0 + (tau_share / at_one).ln() / rho.ln();
        k.ceil().clamp(1.0, 1e6) as usize
    };
    let mut k = seed_k;
    while k > 1 && tail(k - 1).hi() <= tau_share {
        k -= 1;
    }
    while tail(k).hi() > tau_share {
        k += 1;
        if k > 10_000_000 {
            return Err(Error::NotConverged(tail(k).hi()));
        }
    }
    let t = tail(k);
    debug_assert!(t.hi() <= tau_share);
    Ok(LStar { l_star: k * n1, k, seed_k, tail: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{registry_get, LySource};
    use crate::ulam::{assemble, Mesh};
    use num_rational::BigRational;
    use num_traits::{One, Signed, Zero};

    fn cert_for(m: Matrix2, n1: usize, ly: LyConstants) -> DecayCertificate {
        let e = dominant_eigen(&m).unwrap();
        let profile = ContractionProfile {
            log2_d: 10,
            n1,
            alpha2_target: 0.0,
            alpha2_achieved: 0.0,
            c: vec![],
            drift: 0.0,
            row_sum: 1.0,
        };
        DecayCertificate {
            n1,
            alpha2: Interval::ZERO,
            cert_mesh_log2: 10,
            m,
            rho_star: e.rho,
            a: e.a,
            b: e.b,
            a_point: e.a_point,
            b_point: e.b_point,
            c_star: e.c_star,
            ly,
            profile,
        }
    }

    fn pt(x: f64) -> Interval {
        Interval::point(x)
    }

    #[test]
    fn doubling_contracts_in_m_steps() {
        for m in [3u32, 6, 9] {
            let map = registry_get("doubling").unwrap();
            let p = assemble(&map, Mesh::new(m).unwrap()).unwrap();
            let prof = certify_contraction(&p, Interval::ZERO, 40).unwrap();
            assert_eq!(prof.n1, m as usize);
            assert_eq!(prof.alpha2_achieved, 0.0);
            assert_eq!(prof.c[0], 1.0);
        }
    }

    #[test]
    fn zero_steps_give_no_contraction() {
        let map = registry_get("doubling").unwrap();
        let p = assemble(&map, Mesh::new(4).unwrap()).unwrap();
        let err = certify_contraction(&p, Interval::point(0.5), 0).unwrap_err();
        assert!(matches!(err, Error::CertificationFailed { best, .. } if best >= 1.0));
        let err = certify_contraction(&p, Interval::ZERO, 3).unwrap_err();
        assert!(matches!(err, Error::CertificationFailed { n_max: 3, .. }));
    }

    #[test]
    fn lanford_profile_is_sound_on_random_vectors() {
        let map = registry_get("lanford").unwrap();
        let p = assemble(&map, Mesh::new(8).unwrap()).unwrap();
        let prof = certify_contraction(&p, Interval::point(0.25), 60).unwrap();
        assert!(prof.alpha2_achieved <= 0.25);
        let d = p.d();
        let mut state = 12345u64;
        for _ in 0..10 {
            let mut v: Vec<f64> = (0..d)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let mean = v.iter().sum::<f64>() / d as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let mut u = crate::ulam::BasisVector::new(v.iter().map(|&x| pt(x)).collect());
            let start: f64 = u.coeffs().iter().map(|c| c.mag()).sum::<f64>();
            let slack = u.sum().mag() * 2.0;
            for n in 1..=prof.n1 {
                u = p.apply(&u).unwrap();
                assert!(u.l1_upper() <= prof.c[n] * start * (1.0 + 1e-9) + slack, "n = {n}");
            }
        }
    }

    #[test]
    fn m_matrix_examples() {
        let ly = LyConstants { alpha: pt(0.5), b0: Interval::ZERO, source: LySource::Derived };
        let eps = pt(2f64.powi(-10));
        let m = build_m(&ly, 10, Interval::ZERO, eps);
        assert_eq!(m[0][0], pt(2f64.powi(-10)));
        assert_eq!(m[0][1], Interval::ZERO);
        // ε (1 + α)(1 - α^{n₁})/(1 - α) = 3ε(1 - 2⁻¹⁰).
        assert!(m[1][0].contains(3.0 * 2f64.powi(-10) * (1.0 - 2f64.powi(-10))));
        assert_eq!(m[1][1], Interval::ZERO);
        // No contraction: the second diagonal entry reaches 1.
        let m = build_m(&ly, 0, Interval::ONE, eps);
        assert!(m[1][1].lo() >= 1.0);
        assert!(matches!(dominant_eigen(&m), Err(Error::NoSpectralGap(_))));
    }

    #[test]
    fn eigen_examples() {
        let diag = [[pt(0.5), Interval::ZERO], [Interval::ZERO, pt(0.25)]];
        let e = dominant_eigen(&diag).unwrap();
        assert!(e.rho.contains(0.5));
        assert!(e.a.contains(1.0) && e.b.contains(0.0));
        let nil = [[Interval::ZERO, Interval::ONE], [Interval::ZERO, Interval::ZERO]];
        let e = dominant_eigen(&nil).unwrap();
        assert!(e.rho.contains(0.0));
        assert!(e.b.contains(1.0));
    }

    /// The matrix displayed for the Lanford map.
    fn lanford_displayed() -> Matrix2 {
        [[pt(1.18e-5), pt(4.3333334)], [pt(0.000306), pt(0.022208)]]
    }

    #[test]
    fn eigen_of_published_matrix() {
        let e = dominant_eigen(&lanford_displayed()).unwrap();
        assert!(e.rho.hi() <= 0.05, "{}", e.rho);
        assert!(e.a.subset_of(Interval::new(0.006, 0.007)), "{}", e.a);
        assert!(e.b.subset_of(Interval::new(0.993, 0.994)), "{}", e.b);
        assert!(e.c_star.hi() < 1.02);
    }

    /// Exact rational oracle: `ρ = (t + √disc)/2` lies between the roots' bracketing rationals.
    #[test]
    fn eigenvalue_matches_rational_oracle() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let cases = [
            [q(1, 3), q(2, 5), q(1, 7), q(1, 11)],
            [q(1, 100), q(13, 3), q(3, 10000), q(1, 50)],
            [q(1, 2), q(0, 1), q(1, 9), q(1, 4)],
        ];
        for c in cases {
            let m = [
                [Interval::from_rational(&c[0]), Interval::from_rational(&c[1])],
                [Interval::from_rational(&c[2]), Interval::from_rational(&c[3])],
            ];
            let e = dominant_eigen(&m).unwrap();
            // Characteristic polynomial χ(x) = (m11 - x)(m22 - x) - m12 m21: χ < 0 just above
            // the smaller root and χ > 0 beyond the dominant one.
            let chi = |x: &BigRational| (&c[0] - x) * (&c[3] - x) - &c[1] * &c[2];
            let lo = crate::rigor::interval::exact(e.rho.lo());
            let hi = crate::rigor::interval::exact(e.rho.hi());
            let trace_half = (&c[0] + &c[3]) / BigRational::from_integer(2.into());
            assert!(hi >= trace_half && chi(&hi) >= BigRational::zero(), "{:?}", e.rho);
            assert!(lo <= trace_half || !chi(&lo).is_positive(), "{:?}", e.rho);
            let sum = e.a + e.b;
            assert!(sum.contains(1.0) || (BigRational::one() - crate::rigor::interval::exact(sum.mid())).abs() < q(1, 1_000_000));
        }
    }

    #[test]
    fn tail_and_l_star() {
        let ly = LyConstants { alpha: pt(2.0 / 3.0), b0: pt(1.444444445), source: LySource::Published };
        let c = cert_for(lanford_displayed(), 28, ly);
        let (sup, var) = (Interval::ONE, Interval::ONE);
        // Monotone in l and exactly geometric in k.
        let t4 = tail_bound(&c, sup, var, 112);
        let t5 = tail_bound(&c, sup, var, 140);
        assert!(t5.hi() < t4.hi());
        let ratio = t5.hi() / t4.hi();
        assert!((ratio - c.rho_star.hi()).abs() < 1e-12);
        // Rounding up to a multiple of n₁.
        assert_eq!(tail_bound(&c, sup, var, 113), t5);
        let ls = select_l_star(&c, sup, var, 0.01 / 256.0).unwrap();
        assert!(ls.tail.hi() <= 0.01 / 256.0);
        assert_eq!(ls.l_star % 28, 0);
        assert!(tail_bound(&c, sup, var, ls.l_star - 28).hi() > 0.01 / 256.0);
        let huge = select_l_star(&c, sup, var, 1e9).unwrap();
        assert_eq!(huge.l_star, 28);
        let half = select_l_star(&c, sup, var, 0.005 / 256.0).unwrap();
        assert!(half.l_star == ls.l_star || half.l_star == ls.l_star + 28);
        let nil = cert_for([[Interval::ZERO, Interval::ONE], [Interval::ZERO, Interval::ZERO]], 5, ly);
        assert!(tail_bound(&nil, sup, var, 10).contains(0.0));
    }

    #[test]
    fn synthetic_tail_formula() {
        let ly = LyConstants { alpha: pt(0.5), b0: Interval::ZERO, source: LySource::Derived };
        let mut c = cert_for(lanford_displayed(), 10, ly);
        c.rho_star = Interval::new(0.0, 0.05);
        c.a_point = 0.01;
        c.b_point = 0.99;
        let t = tail_bound(&c, Interval::ONE, Interval::ONE, 40);
        // B₀ = 0: ‖ψ̂h‖₁ ≤ 2, V(ψ̂h) ≤ V(ψ) = 1, Σ_r α^r = 2(1 - 2⁻¹⁰).
        let shifted = (0.01 / 0.99) * (2.0 * (1.0 - 2f64.powi(-10))) + 10.0 * 2.0;
        let oracle = 4.0 * shifted * 0.05f64.powi(4) / 0.95;
        assert!((t.hi() - oracle).abs() <= 1e-12 * oracle && t.lo() <= oracle, "{t} vs {oracle}");
    }

    #[test]
    fn lanford_matrix_against_display() {
        let ly = LyConstants { alpha: pt(0.66666667), b0: pt(1.444444445), source: LySource::Published };
        let m = build_m(&ly, 28, pt(1.0 / 64.0), pt(1.0 / 16384.0));
        let shown = lanford_displayed();
        for (i, j) in [(0, 0), (0, 1), (1, 0)] {
            let rel = (m[i][j].mid() - shown[i][j].mid()).abs() / shown[i][j].mid();
            assert!(rel < 0.01, "entry ({i}, {j}): {} vs {}", m[i][j], shown[i][j]);
        }
        // The displayed m22 sums ε B₀ n₁ (2 + α) + α₂; the per-step terms
        // ε((1+α) B_k + B₀) add up to ε(B₀ n₁ + (1+α) Σ B_k) instead.
        let (a, b0, eps, n) = (0.66666667f64, 1.444444445f64, 1.0 / 16384.0, 28);
        let per_step: f64 = (0..n).map(|k| eps * ((1.0 + a) * b0 * (1.0 - a.powi(k)) / (1.0 - a) + b0)).sum();
        assert!((m[1][1].mid() - (per_step + 1.0 / 64.0)).abs() < 1e-12);
        let displayed = eps * b0 * n as f64 * (2.0 + a) + 1.0 / 64.0;
        assert!((displayed - 0.022208).abs() < 1e-6);
        assert!(m[1][1].lo() > displayed);
    }
}
