//! The JSON report and its decimal interval encoding.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::decay::{DecayCertificate, LStar};
use crate::density::{DensityResult, DensityRoutes};
use crate::diffusion::{DiffusionResult, ErrorBudget, Timings};
use crate::error::{Error, Result};
use crate::rigor::interval::exact;
use crate::rigor::{parse_rational, Interval};

/// An interval as decimal strings whose real values enclose the binary endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecInterval {
    pub lo: String,
    pub hi: String,
}

fn decimal_value(s: &str) -> BigRational {
    parse_rational(s).expect("formatted f64 is a valid decimal")
}

/// Shortest round-trip decimal of `x`, moved one ulp outward if its exact value lies inside.
fn outward_string(x: f64, down: bool) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:e}");
    let (q, e) = (decimal_value(&s), exact(x));
    let inside = if down { q > e } else { q < e };
    if inside {
        format!("{:e}", if down { x.next_down() } else { x.next_up() })
    } else {
        s
    }
}

/// Nearest f64 to a decimal, moved one ulp outward if it lies inside.
fn parse_outward(s: &str, down: bool) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("not a decimal: {s:?}")))?;
    if !x.is_finite() {
        return Ok(x);
    }
    let (q, e) = (parse_rational(s)?, exact(x));
    let inside = if down { e > q } else { e < q };
    Ok(match (inside, down) {
        (true, true) => x.next_down(),
        (true, false) => x.next_up(),
        _ => x,
    })
}

impl From<Interval> for DecInterval {
    fn from(x: Interval) -> Self {
        DecInterval { lo: outward_string(x.lo(), true), hi: outward_string(x.hi(), false) }
    }
}

impl DecInterval {
    pub fn to_interval(&self) -> Result<Interval> {
        Interval::try_new(parse_outward(&self.lo, true)?, parse_outward(&self.hi, false)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateBlock {
    pub n1: usize,
    pub alpha2: DecInterval,
    pub cert_mesh_log2: u32,
    /// Rows of `𝓜`, with the variation component first.
    pub m: [[DecInterval; 2]; 2],
    pub rho_star: DecInterval,
    pub a: DecInterval,
    pub b: DecInterval,
    pub c_star: DecInterval,
    pub ly_alpha: DecInterval,
    pub ly_b0: DecInterval,
    pub ly_source: crate::map_model::LySource,
    pub drift: f64,
    pub row_sum: f64,
    pub l_star: Option<usize>,
    pub tail_at_l_star: Option<DecInterval>,
    /// Binary data for reuse by the `diffusion` subcommand.
    pub raw: DecayCertificate,
}

impl CertificateBlock {
    pub fn new(c: &DecayCertificate, l: Option<&LStar>) -> Self {
        let m = c.m.map(|row| row.map(DecInterval::from));
        CertificateBlock {
            n1: c.n1,
            alpha2: c.alpha2.into(),
            cert_mesh_log2: c.cert_mesh_log2,
            m,
            rho_star: c.rho_star.into(),
            a: c.a.into(),
            b: c.b.into(),
            c_star: c.c_star.into(),
            ly_alpha: c.ly.alpha.into(),
            ly_b0: c.ly.b0.into(),
            ly_source: c.ly.source,
            drift: c.profile.drift,
            row_sum: c.profile.row_sum,
            l_star: l.map(|l| l.l_star),
            tail_at_l_star: l.map(|l| l.tail.into()),
            raw: c.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityBlock {
    pub log2_d: u32,
    pub iterations: usize,
    pub fixpoint_residual: DecInterval,
    /// Bound on `‖h̃ - h‖₁`.
    pub l1_error: DecInterval,
    pub bv_bound: DecInterval,
    pub h_variation: f64,
    pub routes: DensityRoutes,
}

impl DensityBlock {
    pub fn new(log2_d: u32, r: &DensityResult) -> Self {
        DensityBlock {
            log2_d,
            iterations: r.iterations,
            fixpoint_residual: r.fixpoint_residual.into(),
            l1_error: r.l1_error_to_true.into(),
            bv_bound: r.bv_bound.into(),
            h_variation: r.h_variation,
            routes: r.routes.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BudgetBlock {
    pub tail_term: DecInterval,
    pub density_term: DecInterval,
    pub kappa: DecInterval,
    pub total: DecInterval,
    pub tau_split_k: u32,
    pub psi_hat_sup: DecInterval,
    pub tail_within_share: bool,
    pub rest_within_share: bool,
}

impl From<&ErrorBudget> for BudgetBlock {
    fn from(b: &ErrorBudget) -> Self {
        BudgetBlock {
            tail_term: b.tail_term.into(),
            density_term: b.density_term.into(),
            kappa: b.kappa.into(),
            total: b.total.into(),
            tau_split_k: b.tau_split_k,
            psi_hat_sup: b.psi_hat_sup.into(),
            tail_within_share: b.tail_within_share,
            rest_within_share: b.rest_within_share,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McBlock {
    pub n: usize,
    pub k: usize,
    pub precision_bits: u32,
    pub seed: u64,
    pub mu_reference: DecInterval,
    pub mu_tilde: f64,
    pub sigma2_tilde: f64,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: serde_json::Value,
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_eps: Option<DecInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_eps_l: Option<DecInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_enclosure: Option<DecInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_met: Option<bool>,
    /// The enclosure reaches zero, so the observable may be a coboundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coboundary_candidate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McBlock>,
    pub timings: Timings,
    pub summary: String,
}

impl Report {
    pub fn new(command: &str, input: serde_json::Value, threads: usize) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input,
            threads,
            certificate: None,
            density: Vec::new(),
            budget: None,
            mu_eps: None,
            sigma2_eps_l: None,
            sigma2_enclosure: None,
            tau: None,
            tau_met: None,
            coboundary_candidate: None,
            mc: None,
            timings: Timings::default(),
            summary: String::new(),
        }
    }

    pub fn from_diffusion(command: &str, input: serde_json::Value, threads: usize, r: &DiffusionResult) -> Self {
        let mut rep = Report::new(command, input, threads);
        rep.certificate = Some(CertificateBlock::new(&r.cert, Some(&r.l_star)));
        rep.density = vec![DensityBlock::new(r.log2_d, &r.density)];
        rep.budget = Some((&r.budget).into());
        rep.mu_eps = Some(r.mu_eps.into());
        rep.sigma2_eps_l = Some(r.sigma2_eps_l.into());
        rep.sigma2_enclosure = Some(r.sigma2_enclosure.into());
        rep.tau = Some(r.tau);
        rep.tau_met = Some(r.tau_met);
        rep.coboundary_candidate = Some(r.contains_zero);
        rep.timings = r.timings.clone();
        rep.summary = sigma_summary(r.sigma2_enclosure, r.budget.total.hi());
        rep
    }

    /// The report without the fields that legitimately vary between runs.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timings");
            o.remove("threads");
            if let Some(i) = o.get_mut("input").and_then(|i| i.as_object_mut()) {
                i.remove("threads");
                if let Some(c) = i.get_mut("common").and_then(|c| c.as_object_mut()) {
                    c.remove("threads");
                }
            }
        }
        v
    }
}

pub fn sigma_summary(enclosure: Interval, total: f64) -> String {
    let e = DecInterval::from(enclosure);
    format!("sigma^2 in [{}, {}] (budget τ' = {})", e.lo, e.hi, outward_string(total, false))
}
