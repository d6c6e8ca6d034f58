use std::process::Command;

use clap::Parser;
use ulam_diffusion::cli::report::Report;
use ulam_diffusion::cli::{run, Cli, CACHE_ENV};

const BIN: &str = env!("CARGO_BIN_EXE_ulam-diffusion");

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("ulam-diffusion").chain(args.iter().copied())).unwrap()
}

#[test]
fn missing_map_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["certify", "--map", "no/such/map.toml", "--obs", "x", "--d", "8", "--tau", "0.05"])
        .current_dir(dir.path())
        .env_remove(CACHE_ENV)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "map_not_found");
    assert!(err["error"]["message"].as_str().unwrap().contains("map spec not found"));
}

#[test]
fn bad_observable_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["certify", "--map", "doubling", "--obs", "x^", "--d", "8", "--tau", "0.05"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn doubling_certify_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = Command::new(BIN)
        .args(["certify", "--map", "doubling", "--obs", "x", "--d", "10", "--tau", "0.05", "--threads", "1"])
        .args(["--cache-dir", dir.path().to_str().unwrap(), "-o", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("sigma^2 in ["), "{stdout}");
    assert!(stdout.contains("(budget τ' = "));
    let rep: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let enc = rep.sigma2_enclosure.as_ref().unwrap().to_interval().unwrap();
    assert!(enc.contains(0.25));
    assert_eq!(rep.tau_met, Some(false));
    let sigma = rep.sigma2_eps_l.as_ref().unwrap().to_interval().unwrap();
    assert!(sigma.subset_of(enc));
}

#[test]
fn report_round_trip_preserves_intervals() {
    let rep = run(&cli(&["certify", "--map", "doubling", "--obs", "x", "--d", "8", "--tau", "0.05", "--threads", "1"])).unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    let back: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(rep.canonical(), back.canonical());
    let a = rep.sigma2_enclosure.unwrap().to_interval().unwrap();
    let b = back.sigma2_enclosure.unwrap().to_interval().unwrap();
    assert!(a.subset_of(b));
}

#[test]
fn cached_and_fresh_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["certify", "--map", "lanford", "--obs", "x^2", "--d", "9", "--d-cert", "8", "--tau", "1", "--threads", "1"];
    let fresh = run(&cli(&args)).unwrap();
    let mut with_cache: Vec<&str> = args.to_vec();
    with_cache.extend(["--cache-dir", cache]);
    let first = run(&cli(&with_cache)).unwrap();
    let second = run(&cli(&with_cache)).unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().count() >= 2);
    let strip = |r: &Report| {
        let mut v = r.canonical();
        v["input"]["common"]["cache_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&fresh), strip(&first));
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let mut reports = Vec::new();
    for t in ["1", "4", "8"] {
        let r = run(&cli(&["certify", "--map", "lanford", "--obs", "x^2", "--d", "10", "--d-cert", "8", "--tau", "1", "--threads", t])).unwrap();
        let m = run(&cli(&["mc", "--map", "lanford", "--obs", "x^2", "--n", "64", "--k", "20", "--zeta", "128", "--mu-ref", "0.383,0.384", "--threads", t])).unwrap();
        reports.push((r.canonical(), m.canonical()));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn staged_budget_matches_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let full = run(&cli(&["certify", "--map", "lanford", "--obs", "x^2", "--d", "9", "--d-cert", "8", "--tau", "1"])).unwrap();
    let (dec, den) = (p("decay.json"), p("density.json"));
    let d = run(&cli(&["decay", "--map", "lanford", "--d-cert", "8"])).unwrap();
    std::fs::write(&dec, serde_json::to_string(&d).unwrap()).unwrap();
    let n = run(&cli(&["density", "--map", "lanford", "--d", "9", "--d-cert", "8"])).unwrap();
    std::fs::write(&den, serde_json::to_string(&n).unwrap()).unwrap();
    let b = run(&cli(&["diffusion", "--decay-report", &dec, "--density-report", &den, "--obs", "x^2", "--tau", "1"])).unwrap();
    let (fb, bb) = (full.budget.unwrap(), b.budget.unwrap());
    assert_eq!(fb.kappa, bb.kappa);
    assert_eq!(fb.tail_term, bb.tail_term);
    let (x, y) = (fb.total.to_interval().unwrap(), bb.total.to_interval().unwrap());
    assert!((x.hi() - y.hi()).abs() <= 1e-12 * x.hi());
}
