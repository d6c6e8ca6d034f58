//! Command-line front end: argument parsing, stage orchestration and JSON reports.

pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::decay::{select_l_star, DecayCertificate};
use crate::density::fixed_point;
use crate::diffusion::{budget_assemble, center_observable, certificate_stage, certify_sigma2, density_stage, psi_bounds, SigmaConfig};
use crate::error::{Error, Result};
use crate::map_model::{ly_constants_full_branch, registry_get, PiecewiseMap};
use crate::mc_check::{estimate, simulate_blocks, write_blocks_csv, write_histogram_csv, write_normal_csv, McConfig};
use crate::rigor::{parse_rational, Interval, Observable};
use crate::ulam::cache::assemble_cached;
use crate::ulam::{project, Mesh};
use report::{BudgetBlock, CertificateBlock, DecInterval, DensityBlock, McBlock, Report};

pub const CACHE_ENV: &str = "ULAM_CACHE_DIR";

#[derive(Parser, Debug, Serialize)]
#[command(name = "ulam-diffusion", version, about = "Certified diffusion coefficients via Ulam's method")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Full pipeline: decay certificate, density, budget and enclosure of σ².
    Certify(CertifyArgs),
    /// Decay certificate at the certificate mesh.
    Decay(DecayArgs),
    /// Certified ‖h_ε - h‖₁ for one or more meshes.
    Density(DensityArgs),
    /// Error budget only, from saved decay and density reports.
    Diffusion(DiffusionArgs),
    /// Non-rigorous Monte Carlo estimates of μ and σ².
    Mc(McArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyChoice {
    /// The map's own constants (published ones for registry maps).
    #[default]
    Map,
    /// Constants derived from the branches.
    Derived,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Registry name (`lanford`, `doubling`) or path to a TOML map file.
    #[arg(long)]
    pub map: String,
    #[arg(long, value_enum, default_value_t = LyChoice::Map)]
    pub ly: LyChoice,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, env = CACHE_ENV)]
    pub cache_dir: Option<PathBuf>,
    /// Report path.
    #[arg(long, short, default_value = "report.json")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub obs: String,
    /// Mesh exponent: d = 2^D.
    #[arg(long)]
    pub d: u32,
    /// Certificate mesh exponent; defaults to min(d, 14).
    #[arg(long)]
    pub d_cert: Option<u32>,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 256)]
    pub tau_split_k: u32,
    #[arg(long, default_value = "1/64")]
    pub alpha2: String,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DecayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 14)]
    pub d_cert: u32,
    #[arg(long, default_value = "1/64")]
    pub alpha2: String,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    /// Observable for selecting l*; skipped when absent.
    #[arg(long)]
    pub obs: Option<String>,
    /// Tail share τ/k used for l*.
    #[arg(long, default_value = "0.01/256")]
    pub tau_share: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mesh exponents, e.g. `--d 12,24`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<u32>,
    /// Certificate mesh exponent; defaults to min(d, 14) per entry.
    #[arg(long)]
    pub d_cert: Option<u32>,
    #[arg(long, default_value = "1/64")]
    pub alpha2: String,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiffusionArgs {
    /// Report holding the decay certificate (from `decay` or `certify`).
    #[arg(long)]
    pub decay_report: PathBuf,
    /// Report holding the density bound; defaults to the decay report.
    #[arg(long)]
    pub density_report: Option<PathBuf>,
    /// Mesh exponent to take from the density report; defaults to its first entry.
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub obs: String,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 256)]
    pub tau_split_k: u32,
    #[arg(long, short, default_value = "report.json")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub obs: String,
    #[arg(long, default_value_t = 20000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 1024)]
    pub zeta: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference mean as `lo,hi`; computed from the Ulam density when absent.
    #[arg(long)]
    pub mu_ref: Option<String>,
    /// Mesh exponent for the computed reference mean.
    #[arg(long, default_value_t = 14)]
    pub mu_d: u32,
    #[arg(long, default_value_t = 60)]
    pub bins: usize,
    /// Variance for the normal-curve CSV; defaults to σ̃².
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Prefix for `_blocks.csv`, `_hist.csv` and `_normal.csv`.
    #[arg(long)]
    pub csv_prefix: Option<PathBuf>,
}

impl Command {
    fn threads(&self) -> Option<usize> {
        match self {
            Command::Certify(a) => a.common.threads,
            Command::Decay(a) => a.common.threads,
            Command::Density(a) => a.common.threads,
            Command::Mc(a) => a.common.threads,
            Command::Diffusion(_) => None,
        }
    }

    fn output(&self) -> &Path {
        match self {
            Command::Certify(a) => &a.common.output,
            Command::Decay(a) => &a.common.output,
            Command::Density(a) => &a.common.output,
            Command::Mc(a) => &a.common.output,
            Command::Diffusion(a) => &a.output,
        }
    }
}

fn parse_f64_arg(s: &str, what: &str) -> Result<f64> {
    let q = parse_rational(s).map_err(|_| Error::InvalidArgument(format!("{what}: not a number: {s:?}")))?;
    Ok(Interval::from_rational(&q).mid())
}

pub fn load_map(c: &Common) -> Result<PiecewiseMap> {
    let map = registry_get(&c.map)?;
    match c.ly {
        LyChoice::Map => Ok(map),
        LyChoice::Derived => {
            let ly = ly_constants_full_branch(map.branches())?;
            map.with_ly(ly)
        }
    }
}

fn echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

pub fn run_certify(a: &CertifyArgs, threads: usize) -> Result<Report> {
    let map = load_map(&a.common)?;
    let psi = Observable::parse(&a.obs)?;
    let mut cfg = SigmaConfig::new(a.d, a.d_cert.unwrap_or(a.d.min(14)), a.tau);
    cfg.tau_split_k = a.tau_split_k;
    cfg.alpha2 = parse_f64_arg(&a.alpha2, "alpha2")?;
    cfg.n_max = a.n_max;
    cfg.cache_dir = a.common.cache_dir.clone();
    let r = certify_sigma2(&map, &psi, &cfg)?;
    Ok(Report::from_diffusion("certify", echo(a), threads, &r))
}

pub fn run_decay(a: &DecayArgs, threads: usize) -> Result<Report> {
    let map = load_map(&a.common)?;
    if a.d_cert > 16 {
        return Err(Error::InvalidArgument(format!("certificate mesh 2^{} exceeds 2^16", a.d_cert)));
    }
    let t = Instant::now();
    let (cert, _) = certificate_stage(&map, a.d_cert, parse_f64_arg(&a.alpha2, "alpha2")?, a.n_max, a.common.cache_dir.as_deref())?;
    let mut rep = Report::new("decay", echo(a), threads);
    rep.timings.certificate = t.elapsed().as_secs_f64();
    let l = match &a.obs {
        Some(o) => {
            let (sup, var) = psi_bounds(&Observable::parse(o)?);
            Some(select_l_star(&cert, sup, var, parse_f64_arg(&a.tau_share, "tau-share")?)?)
        }
        None => None,
    };
    rep.summary = format!(
        "n1 = {}, rho* <= {}{}",
        cert.n1,
        DecInterval::from(cert.rho_star).hi,
        l.map(|l| format!(", l* = {}", l.l_star)).unwrap_or_default()
    );
    rep.certificate = Some(CertificateBlock::new(&cert, l.as_ref()));
    Ok(rep)
}

pub fn run_density(a: &DensityArgs, threads: usize) -> Result<Report> {
    let map = load_map(&a.common)?;
    let alpha2 = parse_f64_arg(&a.alpha2, "alpha2")?;
    let cache = a.common.cache_dir.as_deref();
    let mut rep = Report::new("density", echo(a), threads);
    let mut lines = Vec::new();
    for &m in &a.d {
        let d_cert = a.d_cert.unwrap_or(m.min(14));
        let t = Instant::now();
        let (cert, p_cert) = certificate_stage(&map, d_cert, alpha2, a.n_max, cache)?;
        rep.timings.certificate += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let p = if m == d_cert { p_cert } else { assemble_cached(&map, Mesh::new(m)?, cache)? };
        rep.timings.assembly += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let r = density_stage(&map, &p, &cert)?;
        rep.timings.density += t.elapsed().as_secs_f64();
        lines.push(format!("d = 2^{m}: ||h_eps - h||_1 <= {}", DecInterval::from(r.l1_error_to_true).hi));
        rep.density.push(DensityBlock::new(m, &r));
        if rep.certificate.is_none() {
            rep.certificate = Some(CertificateBlock::new(&cert, None));
        }
    }
    rep.summary = lines.join("\n");
    Ok(rep)
}

fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: not a report: {e}", path.display())))
}

/// The budget from a saved certificate and density bound, without recomputing either.
pub fn run_diffusion(a: &DiffusionArgs, threads: usize) -> Result<Report> {
    let dec = read_report(&a.decay_report)?;
    let cert: DecayCertificate = dec
        .certificate
        .ok_or_else(|| Error::InvalidArgument(format!("{}: no certificate block", a.decay_report.display())))?
        .raw;
    let den = match &a.density_report {
        Some(p) => read_report(p)?,
        None => read_report(&a.decay_report)?,
    };
    let block = match a.d {
        Some(m) => den.density.iter().find(|b| b.log2_d == m),
        None => den.density.first(),
    }
    .ok_or_else(|| Error::InvalidArgument("density report has no matching mesh".into()))?;
    let psi = Observable::parse(&a.obs)?;
    let (sup, var) = psi_bounds(&psi);
    let k = a.tau_split_k.max(1);
    let l = select_l_star(&cert, sup, var, a.tau / k as f64)?;
    let mesh = Mesh::new(block.log2_d)?;
    let density_err = block.l1_error.to_interval()?;
    let ly = cert.ly;
    let budget = budget_assemble(&ly, mesh, &cert, density_err, &psi, l.l_star, a.tau, k);
    let mut rep = Report::new("diffusion", echo(a), threads);
    rep.summary = format!(
        "l* = {}, budget total <= {} (tau = {})",
        l.l_star,
        DecInterval::from(budget.total).hi,
        a.tau
    );
    rep.tau = Some(a.tau);
    rep.tau_met = Some(budget.total.hi() <= a.tau);
    rep.certificate = Some(CertificateBlock::new(&cert, Some(&l)));
    rep.density = vec![block.clone()];
    rep.budget = Some(BudgetBlock::from(&budget));
    Ok(rep)
}

fn parse_mu_ref(s: &str) -> Result<Interval> {
    let (lo, hi) = s.split_once(',').unwrap_or((s, s));
    let lo = Interval::from_rational(&parse_rational(lo)?);
    let hi = Interval::from_rational(&parse_rational(hi)?);
    Interval::try_new(lo.lo(), hi.hi())
}

pub fn run_mc(a: &McArgs, threads: usize) -> Result<Report> {
    let map = load_map(&a.common)?;
    let psi = Observable::parse(&a.obs)?;
    let mu_ref = match &a.mu_ref {
        Some(s) => parse_mu_ref(s)?,
        None => {
            let mesh = Mesh::new(a.mu_d)?;
            let p = assemble_cached(&map, mesh, a.common.cache_dir.as_deref())?;
            let (h, _) = fixed_point(&p, 1000);
            center_observable(&project(&psi, mesh), &h, mesh)?.1
        }
    };
    let mut cfg = McConfig::new(a.n, a.k, a.zeta, a.seed, mu_ref);
    cfg.bins = a.bins;
    let t = Instant::now();
    let blocks = simulate_blocks(&map, &psi, &cfg)?;
    let r = estimate(&cfg, &blocks)?;
    let mut outputs = Vec::new();
    if let Some(prefix) = &a.csv_prefix {
        let path = |s: &str| PathBuf::from(format!("{}{s}", prefix.display()));
        let (b, h, n) = (path("_blocks.csv"), path("_hist.csv"), path("_normal.csv"));
        write_blocks_csv(&b, &r.block_averages)?;
        write_histogram_csv(&h, &r.histogram)?;
        write_normal_csv(&n, &r.histogram, mu_ref.mid(), a.sigma2.unwrap_or(r.sigma2_tilde), a.k, 400)?;
        outputs.extend([b, h, n].iter().map(|p| p.display().to_string()));
    }
    let mut rep = Report::new("mc", echo(a), threads);
    rep.timings.green_kubo = t.elapsed().as_secs_f64();
    rep.summary = format!("mu~ = {:.6}, sigma2~ = {:.6} (n = {}, k = {}, zeta = {})", r.mu_tilde, r.sigma2_tilde, a.n, a.k, a.zeta);
    rep.mc = Some(McBlock {
        n: a.n,
        k: a.k,
        precision_bits: a.zeta,
        seed: a.seed,
        mu_reference: mu_ref.into(),
        mu_tilde: r.mu_tilde,
        sigma2_tilde: r.sigma2_tilde,
        outputs,
    });
    Ok(rep)
}

/// Runs a parsed command on a pool of the requested size.
pub fn run(cli: &Cli) -> Result<Report> {
    let threads = cli
        .command
        .threads()
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(Error::InvalidArgument("--threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Certify(a) => run_certify(a, threads),
        Command::Decay(a) => run_decay(a, threads),
        Command::Density(a) => run_density(a, threads),
        Command::Diffusion(a) => run_diffusion(a, threads),
        Command::Mc(a) => run_mc(a, threads),
    })
}

pub fn write_report(path: &Path, rep: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(rep).expect("report serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|rep| {
        write_report(cli.command.output(), &rep)?;
        Ok(rep)
    });
    match result {
        Ok(rep) => {
            println!("{}", rep.summary);
            0
        }
        Err(e) => {
            let obj = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{obj}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}
