//! The truncated Green–Kubo sum `σ²_{ε,l}` and its certified error budget.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decay::{certify_contraction_cached, decay_from_profile, select_l_star, tail_bound, DecayCertificate, LStar};
use crate::density::{certified_density_error, fixed_point, DensityResult};
use crate::error::{Error, Result};
use crate::map_model::{LyConstants, PiecewiseMap};
use crate::rigor::round::add_up;
use crate::rigor::{Interval, Observable};
use crate::ulam::cache::assemble_cached;
use crate::ulam::{integrate_product, pointwise_product_with_density, project, BasisVector, Mesh, UlamOperator};

/// The observable centered against the computed density.
#[derive(Clone, Debug)]
pub struct CenteredObservable {
    /// `∫_{I_i} (ψ - μ_ε) dm`.
    pub psi_hat: BasisVector,
    /// `∫_{I_i} (ψ - μ_ε)² dm`, exact up to rounding (not the square of a projection).
    pub psi_hat_sq: BasisVector,
    pub mu: Interval,
}

/// `μ_ε = ∫ψ h dm` and the cell integrals of `ψ - μ_ε`.
pub fn center_observable(psi_vec: &BasisVector, h: &BasisVector, mesh: Mesh) -> Result<(BasisVector, Interval)> {
    let mu = integrate_product(psi_vec, h, mesh)?;
    let cell = mu * mesh.eps();
    Ok((BasisVector::new(psi_vec.coeffs().iter().map(|&v| v - cell).collect()), mu))
}

/// Projects `ψ` and `ψ²`, then centers both against `h`.
pub fn centered(psi: &Observable, h: &BasisVector, mesh: Mesh) -> Result<CenteredObservable> {
    let v = project(psi, mesh);
    let v2 = project(&psi.squared(), mesh);
    let (psi_hat, mu) = center_observable(&v, h, mesh)?;
    let eps = mesh.eps();
    let mu_sq_cell = mu.square() * eps;
    let two_mu = mu * 2.0;
    let sq = v2
        .coeffs()
        .iter()
        .zip(v.coeffs())
        .map(|(&a, &b)| a - two_mu * b + mu_sq_cell)
        .collect();
    Ok(CenteredObservable { psi_hat, psi_hat_sq: BasisVector::new(sq), mu })
}

/// `∫ψ̂²h dm + 2 Σ_{i=1}^{l-1} ∫ P_ε^i(ψ̂ h) ψ̂ dm` in interval arithmetic.
///
/// `P_ε(ψ̂h) = P_ε(Π(ψ̂h))`, and `Π(ψ̂h)` has cell integrals `d ∫_{I_i}ψ̂ · h_i`;
/// the pairing of a step function `u` with `ψ̂` is `d Σ u_j ∫_{I_j}ψ̂`.
pub fn truncated_green_kubo(p: &UlamOperator, obs: &CenteredObservable, h: &BasisVector, l_star: usize) -> Result<Interval> {
    let mesh = p.mesh();
    let zero_lag = integrate_product(&obs.psi_hat_sq, h, mesh)?;
    let mut u = pointwise_product_with_density(&obs.psi_hat, h, mesh)?;
    let mut sum = Interval::ZERO;
    for _ in 1..l_star {
        u = p.apply(&u)?;
        sum += integrate_product(&u, &obs.psi_hat, mesh)?;
    }
    Ok(zero_lag + sum * 2.0)
}

/// The discretization and truncation errors of `σ²_{ε,l*}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// `4‖ψ‖_∞ Σ_{i ≥ l*} ‖P^i(ψ̂h)‖₁`.
    pub tail_term: Interval,
    /// `(16(l*-1) + 8) ‖ψ‖²_∞ ‖h̃ - h‖₁`.
    pub density_term: Interval,
    /// `4‖ψ‖_∞ Γε Σ_{i<l*} Σ_{j<i} (…)`.
    pub kappa: Interval,
    pub tau_split_k: u32,
    pub total: Interval,
    /// The bound `‖ψ̂_ε‖_∞ ≤ 2‖ψ‖_∞` used in every term.
    pub psi_hat_sup: Interval,
    /// `tail ≤ τ/k`.
    pub tail_within_share: bool,
    /// `density_term + κ ≤ (k-1)τ/k`.
    pub rest_within_share: bool,
}

/// `Σ_{i=1}^{L} Σ_{j=0}^{i-1} (2‖ψ‖_∞(B_j + 1 + α^j B₀/(1-α)) + α^j c V(ψ))`, `c = (B₀+1-α)/(1-α)`.
///
/// Since `B_j + α^j B₀/(1-α) = B₀/(1-α)`, the summand is `2‖ψ‖_∞ c + α^j c V(ψ)`, and
///
/// ```text
/// S = 2‖ψ‖_∞ c L(L+1)/2 + c V(ψ) (L(1-α) - α(1-α^L)) / (1-α)².
/// ```
pub fn kappa_double_sum(ly: &LyConstants, psi_sup: Interval, psi_var: Interval, l: usize) -> Interval {
    if l <= 1 {
        return Interval::ZERO;
    }
    let big_l = (l - 1) as f64;
    let gap = ly.one_minus_alpha();
    let c = Interval::ONE + ly.b0_over_gap();
    let pairs = Interval::point(big_l) * Interval::point(big_l + 1.0) * Interval::point(0.5);
    let a = ly.alpha;
    let g = (Interval::point(big_l) * gap - a * (Interval::ONE - a.powi(l as u32 - 1)))
        .checked_div(gap.square())
        .expect("alpha < 1");
    let g = Interval::new(g.lo().max(0.0), g.hi());
    psi_sup * 2.0 * c * pairs + c * psi_var * g
}

/// `κ = 4‖ψ‖_∞ Γ ε S`, with `|||P_ε - P||| ≤ Γε`.
pub fn kappa(ly: &LyConstants, eps: Interval, psi_sup: Interval, psi_var: Interval, l: usize) -> Interval {
    Interval::point(4.0) * psi_sup * ly.gamma() * eps * kappa_double_sum(ly, psi_sup, psi_var, l)
}

/// Upper bounds of `‖ψ‖_∞` and `V(ψ)` as point intervals.
pub fn psi_bounds(psi: &Observable) -> (Interval, Interval) {
    (Interval::point(psi.sup_norm_bound().hi()), Interval::point(psi.var_bound().hi()))
}

/// Combines the three error terms; see [`ErrorBudget`].
#[allow(clippy::too_many_arguments)]
pub fn budget_assemble(
    ly: &LyConstants,
    mesh: Mesh,
    cert: &DecayCertificate,
    density_err: Interval,
    psi: &Observable,
    l_star: usize,
    tau: f64,
    tau_split_k: u32,
) -> ErrorBudget {
    let (sup, var) = psi_bounds(psi);
    let tail_term = tail_bound(cert, sup, var, l_star);
    let lm1 = l_star.saturating_sub(1) as f64;
    let density_term = Interval::point(16.0 * lm1 + 8.0) * sup.square() * density_err;
    let density_term = Interval::new(density_term.lo().max(0.0), density_term.hi());
    let kappa = kappa(ly, mesh.eps(), sup, var, l_star);
    let total = tail_term + density_term + kappa;
    let k = tau_split_k.max(1) as f64;
    let share = tau / k;
    ErrorBudget {
        tail_term,
        density_term,
        kappa,
        tau_split_k,
        total: Interval::new(total.lo().max(0.0), total.hi()),
        psi_hat_sup: sup * 2.0,
        tail_within_share: tail_term.hi() <= share,
        rest_within_share: add_up(density_term.hi(), kappa.hi()) <= tau - share,
    }
}

/// Parameters of a full certification run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaConfig {
    pub log2_d: u32,
    pub log2_d_cert: u32,
    pub tau: f64,
    pub tau_split_k: u32,
    pub alpha2: f64,
    pub n_max: usize,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl SigmaConfig {
    pub fn new(log2_d: u32, log2_d_cert: u32, tau: f64) -> Self {
        SigmaConfig { log2_d, log2_d_cert, tau, tau_split_k: 256, alpha2: 1.0 / 64.0, n_max: 200, cache_dir: None }
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub certificate: f64,
    pub assembly: f64,
    pub density: f64,
    pub green_kubo: f64,
}

#[derive(Clone, Debug)]
pub struct DiffusionResult {
    pub sigma2_eps_l: Interval,
    pub sigma2_enclosure: Interval,
    pub mu_eps: Interval,
    pub budget: ErrorBudget,
    pub l_star: LStar,
    pub cert: DecayCertificate,
    pub density: DensityResult,
    pub log2_d: u32,
    pub tau: f64,
    pub tau_met: bool,
    /// The enclosure reaches zero: `ψ` may be a coboundary.
    pub contains_zero: bool,
    pub timings: Timings,
}

/// Decay certificate at the certificate mesh, reusing `fine` when the meshes agree.
pub fn certificate_stage(
    map: &PiecewiseMap,
    log2_d_cert: u32,
    alpha2: f64,
    n_max: usize,
    cache: Option<&std::path::Path>,
) -> Result<(DecayCertificate, UlamOperator)> {
    let mesh = Mesh::new(log2_d_cert)?;
    let p = assemble_cached(map, mesh, cache)?;
    let prof = certify_contraction_cached(&p, map.hash(), Interval::point(alpha2), n_max, cache)?;
    Ok((decay_from_profile(&map.ly(), prof)?, p))
}

/// Fixed point and certified density error on `p`'s mesh.
pub fn density_stage(map: &PiecewiseMap, p: &UlamOperator, cert: &DecayCertificate) -> Result<DensityResult> {
    let (h, it) = fixed_point(p, (10 * cert.n1).max(100));
    let same = (cert.cert_mesh_log2 == p.mesh().log2_d()).then_some(&cert.profile);
    certified_density_error(&map.ly(), p, cert, h, it, same)
}

/// The full pipeline: certificate, truncation length, density, budget and `σ²_{ε,l*}`.
pub fn certify_sigma2(map: &PiecewiseMap, psi: &Observable, cfg: &SigmaConfig) -> Result<DiffusionResult> {
    if !(cfg.tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau = {} must be positive", cfg.tau)));
    }
    if cfg.log2_d_cert > 16 {
        return Err(Error::InvalidArgument(format!("certificate mesh 2^{} exceeds 2^16", cfg.log2_d_cert)));
    }
    let cache = cfg.cache_dir.as_deref();
    let mut timings = Timings::default();
    let t = Instant::now();
    let (cert, p_cert) = certificate_stage(map, cfg.log2_d_cert, cfg.alpha2, cfg.n_max, cache)?;
    timings.certificate = t.elapsed().as_secs_f64();
    let (sup, var) = psi_bounds(psi);
    let k = cfg.tau_split_k.max(1);
    let l_star = select_l_star(&cert, sup, var, cfg.tau / k as f64)?;

    let t = Instant::now();
    let mesh = Mesh::new(cfg.log2_d)?;
    let p = if cfg.log2_d == cfg.log2_d_cert { p_cert } else { assemble_cached(map, mesh, cache)? };
    timings.assembly = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let density = density_stage(map, &p, &cert)?;
    timings.density = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let obs = centered(psi, &density.h_eps, mesh)?;
    let sigma2 = truncated_green_kubo(&p, &obs, &density.h_eps, l_star.l_star)?;
    timings.green_kubo = t.elapsed().as_secs_f64();

    let budget = budget_assemble(
        &map.ly(),
        mesh,
        &cert,
        density.l1_error_to_true,
        psi,
        l_star.l_star,
        cfg.tau,
        k,
    );
    let r = budget.total.hi();
    let enclosure = Interval::new(
        crate::rigor::round::sub_down(sigma2.lo(), r),
        add_up(sigma2.hi(), r),
    );
    Ok(DiffusionResult {
        sigma2_eps_l: sigma2,
        sigma2_enclosure: enclosure,
        mu_eps: obs.mu,
        tau_met: r <= cfg.tau,
        contains_zero: enclosure.contains(0.0),
        budget,
        l_star,
        cert,
        density,
        log2_d: cfg.log2_d,
        tau: cfg.tau,
        timings,
    })
}
