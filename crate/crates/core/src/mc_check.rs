//! Non-rigorous Monte Carlo cross-check: ζ-bit orbits, block averages and their statistics.
//!
//! Points of `[0, 1)` are held as integers `X` with `x = X / 2^ζ`; branch polynomials are
//! evaluated by Horner's scheme in fixed point with [`GUARD_BITS`] extra bits.

use std::io::Write;
use std::path::Path;

use num_bigint::{BigInt, RandBigInt, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::PiecewiseMap;
use crate::rigor::{Interval, Observable, RatPoly};

pub const GUARD_BITS: u32 = 32;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McConfig {
    /// Number of starting points.
    pub n: usize,
    /// Block length.
    pub k: usize,
    /// Orbit precision ζ in bits.
    pub precision_bits: u32,
    pub seed: u64,
    pub mu_reference: Interval,
    pub bins: usize,
}

impl McConfig {
    pub fn new(n: usize, k: usize, precision_bits: u32, seed: u64, mu_reference: Interval) -> Self {
        McConfig { n, k, precision_bits, seed, mu_reference, bins: 60 }
    }

    fn validate(&self) -> Result<()> {
        if self.precision_bits < 64 {
            return Err(Error::InvalidArgument(format!("precision {} bits is below 64", self.precision_bits)));
        }
        if self.n == 0 || self.k == 0 || self.bins == 0 {
            return Err(Error::InvalidArgument("n, k and the bin count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McResult {
    pub mu_tilde: f64,
    pub sigma2_tilde: f64,
    pub block_averages: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

/// A branch in fixed point: its domain hint and Horner coefficients scaled by `2^(ζ+G)`.
struct FixedBranch {
    hi_hint: f64,
    coeffs: Vec<BigInt>,
}

struct FixedMap {
    zeta: u32,
    one: BigInt,
    branches: Vec<FixedBranch>,
}

fn to_fixed(q: &BigRational, bits: u32) -> BigInt {
    let scaled = q * BigRational::from_integer(BigInt::from(1) << bits);
    scaled.round().to_integer()
}

impl FixedMap {
    fn new(map: &PiecewiseMap, zeta: u32) -> Result<Self> {
        let f = zeta + GUARD_BITS;
        let branches = map
            .branches()
            .iter()
            .map(|b| {
                let exact: &RatPoly = b.exact().ok_or_else(|| {
                    Error::UnsupportedMap("Monte Carlo needs branches with exact rational coefficients".into())
                })?;
                Ok(FixedBranch { hi_hint: b.domain_hi().mid(), coeffs: exact.0.iter().map(|c| to_fixed(c, f)).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FixedMap { zeta, one: BigInt::from(1) << zeta, branches })
    }

    /// `T_b(X)` rounded to ζ bits.
    fn eval_branch(&self, b: usize, x: &BigInt) -> BigInt {
        let c = &self.branches[b].coeffs;
        let mut acc = c.last().cloned().unwrap_or_default();
        for ck in c.iter().rev().skip(1) {
            acc = ((acc * x) >> self.zeta) + ck;
        }
        let half = BigInt::from(1) << (GUARD_BITS - 1);
        (acc + half) >> GUARD_BITS
    }

    /// `T(X)`: the branch guessed from `f64(x)`, corrected to a neighbour if its value leaves `[0, 1)`.
    fn step(&self, x: &BigInt) -> BigInt {
        let xf = self.to_f64(x);
        let guess = self.branches.iter().position(|b| xf <= b.hi_hint).unwrap_or(self.branches.len() - 1);
        let inside = |y: &BigInt| y.sign() != Sign::Minus && y < &self.one;
        let y = self.eval_branch(guess, x);
        if inside(&y) {
            return y;
        }
        for b in [guess.wrapping_sub(1), guess + 1] {
            if b < self.branches.len() {
                let z = self.eval_branch(b, x);
                if inside(&z) {
                    return z;
                }
            }
        }
        if y.sign() == Sign::Minus {
            BigInt::zero()
        } else {
            &self.one - 1
        }
    }

    fn to_f64(&self, x: &BigInt) -> f64 {
        let shift = self.zeta.saturating_sub(60);
        (x >> shift).to_f64().unwrap_or(0.0) / 2f64.powi((self.zeta - shift) as i32)
    }
}

/// `A_k(x_i) = (1/k) Σ_{j<k} ψ(T^j x_i)` for `n` seeded ζ-bit starting points.
///
/// Point `i` draws from ChaCha stream `i` of the seed, so the result does not depend on the
/// thread count. `ψ` is evaluated in f64 at the rounded orbit point.
pub fn simulate_blocks(map: &PiecewiseMap, psi: &Observable, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let fm = FixedMap::new(map, cfg.precision_bits)?;
    Ok((0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let mut x = rng.gen_biguint(cfg.precision_bits as u64).into();
            let mut s = 0.0;
            for j in 0..cfg.k {
                if j > 0 {
                    x = fm.step(&x);
                }
                s += psi.eval_f64(fm.to_f64(&x));
            }
            s / cfg.k as f64
        })
        .collect())
}

/// `μ̃` = mean of the blocks, `σ̃² = (1/n) Σ (k A_k(x_i) - kμ)²/k` with `μ` the midpoint of the reference.
pub fn estimate(cfg: &McConfig, blocks: &[f64]) -> Result<McResult> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("no block averages".into()));
    }
    let n = blocks.len() as f64;
    let k = cfg.k as f64;
    let mu = cfg.mu_reference.mid();
    // Sorted summation makes both statistics independent of the block order.
    let mut sorted = blocks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mu_tilde = sorted.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = sorted.iter().map(|a| k * (a - mu).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    let sigma2_tilde = dev.iter().sum::<f64>() / n;
    Ok(McResult { mu_tilde, sigma2_tilde, block_averages: blocks.to_vec(), histogram: histogram(&sorted, cfg.bins) })
}

/// Equal-width bins over `[min, max]` of sorted data.
fn histogram(sorted: &[f64], bins: usize) -> Vec<HistogramBin> {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let w = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin { left: lo + b as f64 * w, right: lo + (b + 1) as f64 * w, count: 0 })
        .collect();
    for &v in sorted {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

/// One row per block average.
pub fn write_blocks_csv(path: &Path, blocks: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "block_average"])?;
    for (i, a) in blocks.iter().enumerate() {
        w.serialize((i, a))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, hist: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "count"])?;
    for b in hist {
        w.serialize((b.left, b.right, b.count))?;
    }
    w.flush()?;
    Ok(())
}

/// The normal density with mean `mu` and variance `sigma2 / k` on `points` abscissae spanning the histogram.
pub fn write_normal_csv(path: &Path, hist: &[HistogramBin], mu: f64, sigma2: f64, k: usize, points: usize) -> Result<()> {
    let var = sigma2 / k as f64;
    if !(var > 0.0) {
        return Err(Error::InvalidArgument(format!("normal curve needs a positive variance, got {var}")));
    }
    let (lo, hi) = (hist[0].left, hist[hist.len() - 1].right);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "density"])?;
    let m = points.max(2);
    for i in 0..m {
        let x = lo + (hi - lo) * i as f64 / (m - 1) as f64;
        let p = (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        w.serialize((x, p))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text summary line.
pub fn summary(out: &mut impl Write, cfg: &McConfig, r: &McResult) -> std::io::Result<()> {
    writeln!(out, "n = {}, k = {}, zeta = {}: mu~ = {:.6}, sigma2~ = {:.6}", cfg.n, cfg.k, cfg.precision_bits, r.mu_tilde, r.sigma2_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::registry_get;

    fn cfg(n: usize, k: usize, mu: f64) -> McConfig {
        McConfig::new(n, k, 256, 7, Interval::point(mu))
    }

    #[test]
    fn single_step_blocks_are_the_points() {
        let map = registry_get("doubling").unwrap();
        let c = cfg(50, 1, 0.5);
        let blocks = simulate_blocks(&map, &Observable::parse("x").unwrap(), &c).unwrap();
        let fm = FixedMap::new(&map, 256).unwrap();
        for (i, a) in blocks.iter().enumerate() {
            let mut rng = ChaCha20Rng::seed_from_u64(7);
            rng.set_stream(i as u64);
            let x: BigInt = rng.gen_biguint(256).into();
            assert_eq!(*a, fm.to_f64(&x));
        }
    }

    #[test]
    fn doubling_is_an_exact_shift() {
        let map = registry_get("doubling").unwrap();
        let fm = FixedMap::new(&map, 128).unwrap();
        let x = (BigInt::from(0b1011u32) << 124) + 12345;
        let y = fm.step(&x);
        assert_eq!(y, (&x << 1usize) - (BigInt::from(1) << 128usize));
    }

    #[test]
    fn lanford_step_matches_f64() {
        let map = registry_get("lanford").unwrap();
        let fm = FixedMap::new(&map, 256).unwrap();
        for t in [0.01f64, 0.3, 0.5, 0.56, 0.57, 0.9, 0.999] {
            let x = to_fixed(&BigRational::new(((t * 1e6).round() as i64).into(), 1_000_000.into()), 256);
            let y = fm.to_f64(&fm.step(&x));
            let xf = (t * 1e6).round() / 1e6;
            let expect = (2.0 * xf + 0.5 * xf * (1.0 - xf)).fract();
            assert!((y - expect).abs() < 1e-12, "{t}: {y} vs {expect}");
        }
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let map = registry_get("lanford").unwrap();
        let psi = Observable::parse("x^2").unwrap();
        let c = cfg(200, 20, 0.3835);
        let a = simulate_blocks(&map, &psi, &c).unwrap();
        let b = simulate_blocks(&map, &psi, &c).unwrap();
        assert_eq!(a, b);
        let r1 = estimate(&c, &a).unwrap();
        let mut rev = a.clone();
        rev.reverse();
        let r2 = estimate(&c, &rev).unwrap();
        assert_eq!(r1.sigma2_tilde.to_bits(), r2.sigma2_tilde.to_bits());
        assert_eq!(r1.mu_tilde.to_bits(), r2.mu_tilde.to_bits());
        assert_eq!(r1.histogram.iter().map(|b| b.count).sum::<usize>(), 200);
    }

    #[test]
    fn constant_blocks_have_zero_variance() {
        let c = cfg(5, 10, 0.25);
        let r = estimate(&c, &[0.25; 5]).unwrap();
        assert_eq!(r.sigma2_tilde, 0.0);
        assert_eq!(r.mu_tilde, 0.25);
    }

    #[test]
    fn doubling_statistics() {
        let map = registry_get("doubling").unwrap();
        let c = cfg(20000, 100, 0.5);
        let blocks = simulate_blocks(&map, &Observable::parse("x").unwrap(), &c).unwrap();
        let r = estimate(&c, &blocks).unwrap();
        // Standard error of the mean is sqrt(σ²/(nk)) = sqrt(0.25/2e6).
        assert!((r.mu_tilde - 0.5).abs() < 3.0 * (0.25f64 / 2e6).sqrt(), "{}", r.mu_tilde);
        assert!((r.sigma2_tilde - 0.25).abs() < 0.02, "{}", r.sigma2_tilde);
    }

    #[test]
    fn rejects_low_precision() {
        let map = registry_get("doubling").unwrap();
        let mut c = cfg(1, 1, 0.5);
        c.precision_bits = 32;
        assert!(simulate_blocks(&map, &Observable::parse("x").unwrap(), &c).is_err());
    }
}
