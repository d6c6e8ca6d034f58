//! The Ulam fixed point and a certified bound on its L¹ distance to the
//! invariant density `h`.
//!
//! The computed density `h̃` is an exact probability vector (a floating power
//! iterate divided by its exact sum), enclosed coefficientwise. Every later
//! estimate only needs `h̃ ≥ 0`, `∫h̃ = 1` and a bound on `‖h̃ - h‖₁`, so `h̃`
//! is used in place of the exact fixed point `h_ε`.

use serde::{Deserialize, Serialize};

use crate::decay::{ContractionProfile, DecayCertificate, Matrix2, NormPair};
use crate::error::{Error, Result};
use crate::map_model::LyConstants;
use crate::rigor::round::add_up;
use crate::rigor::Interval;
use crate::ulam::{BasisVector, UlamOperator};

/// `Σ_{k<n} B_k` with `B_k = Σ_{i<k} α^i B₀ = B₀(1 - α^k)/(1 - α)`.
pub fn ly_b_sum(ly: &LyConstants, n: usize) -> Interval {
    let gap = ly.one_minus_alpha();
    let geo = (Interval::ONE - ly.alpha.powi(n as u32)).checked_div(gap).expect("alpha < 1");
    let s = ly.b0_over_gap() * (Interval::point(n as f64) - geo);
    Interval::new(s.lo().max(0.0), s.hi().max(0.0))
}

/// Bound on `‖(Pⁿ - P_εⁿ) f‖₁` from `V(f)` and `‖f‖₁`.
///
/// Telescoping `Pⁿ - P_εⁿ = Σ_k P_ε^{n-k}(P - P_ε)P^{k-1}` with
/// `‖(P - P_ε)g‖₁ ≤ ε((1+α)V(g) + B₀‖g‖₁)` and `V(P^k f) ≤ α^k V(f) + B_k ‖f‖₁` gives
///
/// ```text
/// ε ( (1+α)(1-αⁿ)/(1-α) V(f) + (B₀ n + (1+α) Σ_{k<n} B_k) ‖f‖₁ ).
/// ```
pub fn perturbed_iterate_bound(ly: &LyConstants, eps: Interval, n: usize, f_var: Interval, f_l1: Interval) -> Interval {
    let a1 = Interval::ONE + ly.alpha;
    let geo = (Interval::ONE - ly.alpha.powi(n as u32)).checked_div(ly.one_minus_alpha()).expect("alpha < 1");
    let var_coef = a1 * geo;
    let l1_coef = ly.b0 * Interval::point(n as f64) + a1 * ly_b_sum(ly, n);
    let b = eps * (var_coef * f_var + l1_coef * f_l1);
    Interval::new(b.lo().max(0.0), b.hi().max(0.0))
}

/// Floating power iteration from the uniform density, then exact normalization.
///
/// Stops when the floating L¹ change drops below `1e-14` or after `max_iter` steps.
/// The result encloses `w / Σw` for a nonnegative floating vector `w`, a
/// probability vector whatever the quality of the iteration.
pub fn fixed_point(p: &UlamOperator, max_iter: usize) -> (BasisVector, usize) {
    let (w, iters, _) = p.power_iterate(1e-14, max_iter.max(1));
    let s: Interval = w.iter().map(|&x| Interval::point(x)).sum();
    let h = w
        .iter()
        .map(|&x| {
            let q = Interval::point(x).checked_div(s).expect("positive mass");
            Interval::new(q.lo().max(0.0), q.hi())
        })
        .collect();
    (BasisVector::new(h), iters)
}

/// Upper bound of `‖P_ε h - h‖₁`.
pub fn fixpoint_residual(p: &UlamOperator, h: &BasisVector) -> Result<f64> {
    let ph = p.apply(h)?;
    Ok(l1_distance(&ph, h))
}

fn l1_distance(a: &BasisVector, b: &BasisVector) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).fold(0.0, |s, (x, y)| add_up(s, (*x - *y).mag()))
}

/// The individual bounds on `‖h̃ - h‖₁`; the certified value is their minimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityRoutes {
    /// `h - h̃ = Σ_k P^{kn₁}(P^{n₁}h̃ - h̃)`, propagated through `𝓜`.
    pub telescoping: f64,
    /// `h - h̃ = Σ_t P^t (P h̃ - h̃)`, split by residue modulo `n₁`.
    pub one_step: f64,
    /// Same-mesh contraction profile: `ε V(h)(1 + ΣC) + ΣC ‖P_ε h̃ - h̃‖₁`.
    pub same_mesh_profile: Option<f64>,
    /// Same-mesh contraction: `(1-α₂)⁻¹ ‖(P^{n₁} - P_ε^{n₁})h‖₁ + ΣC ‖P_ε h̃ - h̃‖₁`.
    pub same_mesh_contraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DensityResult {
    /// Enclosure of the probability vector `h̃` (cell masses).
    pub h_eps: BasisVector,
    pub iterations: usize,
    /// `[0, ‖P_ε h̃ - h̃‖₁]`.
    pub fixpoint_residual: Interval,
    /// `[0, bound on ‖h̃ - h‖₁]`.
    pub l1_error_to_true: Interval,
    /// `‖h‖_BV ≤ B₀/(1-α) + 1`.
    pub bv_bound: Interval,
    /// Upper bound of `V(h̃)`.
    pub h_variation: f64,
    pub routes: DensityRoutes,
}

/// Sum of the L¹ components along `x_{k+1} = 𝓜 x_k`, using also `‖P^{n₁} g‖₁ ≤ ‖g‖₁`.
///
/// After a fixed number of explicit steps the rest is closed with `(I - 𝓜)⁻¹`.
fn propagated_l1_sum(m: &Matrix2, seed: NormPair) -> Result<f64> {
    const EXPLICIT: usize = 64;
    let mut x = seed;
    let mut total = 0.0;
    for _ in 0..EXPLICIT {
        total = add_up(total, x.l1.hi());
        if x.bv.hi() == 0.0 && x.l1.hi() == 0.0 {
            return Ok(total);
        }
        let next = x.step(m);
        let l1 = if next.l1.hi() < x.l1.hi() { next.l1 } else { x.l1 };
        x = NormPair { bv: next.bv, l1 };
    }
    let [[m11, m12], [m21, m22]] = *m;
    let det = (Interval::ONE - m11) * (Interval::ONE - m22) - m12 * m21;
    if !(det.lo() > 0.0 && m11.hi() < 1.0) {
        return Err(Error::NoSpectralGap(det.lo()));
    }
    let rest = (m21 * x.bv + (Interval::ONE - m11) * x.l1).checked_div(det)?;
    Ok(add_up(total, rest.hi()))
}

/// Certifies `‖h̃ - h‖₁` for the fixed point `h̃` of `p`.
///
/// `same_mesh` is a contraction profile computed on `p`'s mesh, if available.
pub fn certified_density_error(
    ly: &LyConstants,
    p: &UlamOperator,
    cert: &DecayCertificate,
    h: BasisVector,
    iterations: usize,
    same_mesh: Option<&ContractionProfile>,
) -> Result<DensityResult> {
    if !(cert.rho_star.hi() < 1.0) {
        return Err(Error::NoSpectralGap(cert.rho_star.hi()));
    }
    let mesh = p.mesh();
    let eps = mesh.eps();
    let n1 = cert.n1;
    let alpha = ly.alpha;
    let h_var = Interval::new(0.0, h.variation_upper(mesh));
    let r1 = fixpoint_residual(p, &h)?;
    let r1i = Interval::new(0.0, r1);

    // P^{n₁}h̃ - h̃ = (P^{n₁} - P_ε^{n₁})h̃ + (P_ε^{n₁}h̃ - h̃).
    let mut u = h.clone();
    for _ in 0..n1 {
        u = p.apply(&u)?;
    }
    let rn = Interval::new(0.0, l1_distance(&u, &h));
    let b_n1 = ly.b0_over_gap() * (Interval::ONE - alpha.powi(n1 as u32));
    let seed = NormPair {
        bv: (Interval::ONE + alpha.powi(n1 as u32)) * h_var + b_n1,
        l1: perturbed_iterate_bound(ly, eps, n1, h_var, Interval::ONE) + rn,
    };
    let telescoping = propagated_l1_sum(&cert.m, seed)?;

    // q = P h̃ - h̃: ‖(P - P_ε)h̃‖₁ ≤ ε V(P h̃) since h̃ is a step function on the mesh.
    let q_l1 = r1i + eps * (alpha * h_var + ly.b0);
    let q_var = (Interval::ONE + alpha) * h_var + ly.b0;
    let mut one_step = 0.0;
    let mut b_r = Interval::ZERO;
    for r in 0..n1.max(1) {
        let seed = NormPair { bv: alpha.powi(r as u32) * q_var + b_r * q_l1, l1: q_l1 };
        one_step = add_up(one_step, propagated_l1_sum(&cert.m, seed)?);
        b_r += alpha.powi(r as u32) * ly.b0;
    }

    let h_true_var = Interval::new(0.0, ly.b0_over_gap().hi());
    let (mut same_mesh_profile, mut same_mesh_contraction) = (None, None);
    if let Some(prof) = same_mesh.filter(|pr| pr.log2_d == mesh.log2_d()) {
        let a2 = Interval::point(prof.alpha2_achieved);
        let partial: Interval = prof.c[..prof.n1].iter().map(|&c| Interval::new(0.0, c)).sum();
        let sum_c = partial.checked_div(Interval::ONE - a2)?;
        let defect = sum_c * r1i;
        let c = eps * h_true_var * (Interval::ONE + sum_c) + defect;
        same_mesh_profile = Some(c.hi());
        let pert = perturbed_iterate_bound(ly, eps, prof.n1, h_true_var, Interval::ONE);
        let d = pert.checked_div(Interval::ONE - a2)? + defect;
        same_mesh_contraction = Some(d.hi());
    }

    let best = [Some(telescoping), Some(one_step), same_mesh_profile, same_mesh_contraction]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NotConverged(best));
    }
    Ok(DensityResult {
        h_eps: h,
        iterations,
        fixpoint_residual: r1i,
        l1_error_to_true: Interval::new(0.0, best),
        bv_bound: Interval::ONE + h_true_var,
        h_variation: h_var.hi(),
        routes: DensityRoutes { telescoping, one_step, same_mesh_profile, same_mesh_contraction },
    })
}
