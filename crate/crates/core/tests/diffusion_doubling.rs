use ulam_diffusion::diffusion::{certify_sigma2, SigmaConfig};
use ulam_diffusion::map_model::registry_get;
use ulam_diffusion::rigor::Observable;

#[test]
fn doubling_identity_enclosures_are_nested_and_contain_quarter() {
    let map = registry_get("doubling").unwrap();
    let psi = Observable::parse("x").unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for m in [8u32, 10, 12] {
        let res = certify_sigma2(&map, &psi, &SigmaConfig::new(m, m.min(10), 0.05)).unwrap();
        let e = res.sigma2_enclosure;
        println!("d = 2^{m}: {e} (total {})", res.budget.total.hi());
        assert!(e.contains(0.25), "d = 2^{m}: {e}");
        if let Some((lo, hi)) = prev {
            assert!(e.lo() <= hi && lo <= e.hi());
        }
        prev = Some((e.lo(), e.hi()));
        assert!(res.budget.tail_term.hi() <= 0.05 / 256.0);
    }
}

#[test]
fn doubling_coboundary_contains_zero() {
    let map = registry_get("doubling").unwrap();
    let psi = Observable::parse("x on [0,1/2]; x - 1 on [1/2,1]").unwrap();
    let res = certify_sigma2(&map, &psi, &SigmaConfig::new(12, 10, 0.05)).unwrap();
    assert!(res.sigma2_enclosure.contains(0.0), "{}", res.sigma2_enclosure);
    assert!(res.contains_zero);
    assert!(res.sigma2_eps_l.mag() < 1e-3);
}
