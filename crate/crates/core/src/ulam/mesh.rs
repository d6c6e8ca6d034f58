use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigor::round::{add_up, mul_up};
use crate::rigor::{Interval, Observable};

/// Uniform dyadic partition of `[0, 1]` into `d = 2^m` cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    log2_d: u32,
}

impl Mesh {
    pub fn new(log2_d: u32) -> Result<Self> {
        if !(1..=31).contains(&log2_d) {
            return Err(Error::InvalidMesh(format!("log2(d) = {log2_d} must lie in 1..=31")));
        }
        Ok(Mesh { log2_d })
    }

    pub fn from_cells(d: usize) -> Result<Self> {
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidMesh(format!("d = {d} must be a power of two, at least 2")));
        }
        Mesh::new(d.trailing_zeros())
    }

    pub fn log2_d(&self) -> u32 {
        self.log2_d
    }

    pub fn d(&self) -> usize {
        1usize << self.log2_d
    }

    /// `ε = 1/d`, exact.
    pub fn eps(&self) -> Interval {
        Interval::point(self.eps_f64())
    }

    pub fn eps_f64(&self) -> f64 {
        2f64.powi(-(self.log2_d as i32))
    }

    pub fn d_f64(&self) -> f64 {
        2f64.powi(self.log2_d as i32)
    }

    /// Cell `I_k = [k/d, (k+1)/d]`, with exact endpoints.
    pub fn cell(&self, k: usize) -> Interval {
        let e = self.eps_f64();
        Interval::new(k as f64 * e, (k + 1) as f64 * e)
    }
}

/// Coefficients `v_i = ∫_{I_i} φ dm` of a projection onto the Ulam basis.
///
/// The represented function is `Σ v_i χ_{I_i} / m(I_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisVector {
    coeffs: Vec<Interval>,
}

impl BasisVector {
    pub fn new(coeffs: Vec<Interval>) -> Self {
        BasisVector { coeffs }
    }

    pub fn zeros(d: usize) -> Self {
        BasisVector { coeffs: vec![Interval::ZERO; d] }
    }

    /// The density 1, i.e. every coefficient equal to `1/d`.
    pub fn uniform(mesh: Mesh) -> Self {
        BasisVector { coeffs: vec![mesh.eps(); mesh.d()] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Interval] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Interval] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Interval> {
        self.coeffs
    }

    pub fn mids(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.mid()).collect()
    }

    /// Encloses `Σ v_i`, the integral of the represented function.
    pub fn sum(&self) -> Interval {
        self.coeffs.iter().copied().sum()
    }

    /// Upper bound of the L¹ norm of the represented function.
    pub fn l1_upper(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| add_up(acc, c.mag()))
    }

    /// Upper bound of the total variation of the represented step function.
    pub fn variation_upper(&self, mesh: Mesh) -> f64 {
        let s = self
            .coeffs
            .windows(2)
            .fold(0.0, |acc, w| add_up(acc, (w[1] - w[0]).mag()));
        mul_up(s, mesh.d_f64())
    }

    /// Largest coefficient width.
    pub fn max_width(&self) -> f64 {
        self.coeffs.iter().map(|c| c.width()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &BasisVector) -> Result<BasisVector> {
        check_len(self.len(), other.len())?;
        Ok(BasisVector::new(
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| *a - *b).collect(),
        ))
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Projects an observable: `coeffs[i] ⊇ ∫_{I_i} φ dm`.
pub fn project(phi: &Observable, mesh: Mesh) -> BasisVector {
    let coeffs = (0..mesh.d())
        .into_par_iter()
        .with_min_len(4096)
        .map(|k| phi.integrate_cell(mesh.cell(k)))
        .collect();
    BasisVector::new(coeffs)
}

/// `Π(φ h)` with `coeffs[i] ⊇ v_i w_i d`, for a density-type `w`.
pub fn pointwise_product_with_density(v: &BasisVector, w: &BasisVector, mesh: Mesh) -> Result<BasisVector> {
    check_len(v.len(), w.len())?;
    check_len(mesh.d(), v.len())?;
    let d = Interval::point(mesh.d_f64());
    Ok(BasisVector::new(
        v.coeffs.iter().zip(&w.coeffs).map(|(a, b)| *a * *b * d).collect(),
    ))
}

/// Encloses `Σ v_i w_i d = ∫ (Πφ) h dm`.
pub fn integrate_product(v: &BasisVector, w: &BasisVector, mesh: Mesh) -> Result<Interval> {
    check_len(v.len(), w.len())?;
    check_len(mesh.d(), v.len())?;
    let s: Interval = v.coeffs.iter().zip(&w.coeffs).map(|(a, b)| *a * *b).sum();
    Ok(s * mesh.d_f64())
}
