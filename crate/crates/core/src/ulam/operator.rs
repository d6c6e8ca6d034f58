use rayon::prelude::*;

use super::mesh::{check_len, BasisVector, Mesh};
use crate::error::{Error, Result};
use crate::map_model::PiecewiseMap;
use crate::rigor::round::{add_down, add_up};
use crate::rigor::Interval;

/// Rows assembled per batch; bounds the temporary memory of assembly.
const ROW_BATCH: usize = 1 << 16;
/// Columns per parallel task in matrix-vector products.
const COL_BLOCK: usize = 1 << 12;

/// Sparse Ulam matrix `P_kj = m(I_k ∩ T⁻¹ I_j) / m(I_k)` with interval entries.
///
/// Stored column-compressed, since products are taken from the left
/// (`u ↦ uP`). Each entry is a midpoint and a radius; the radius is inflated
/// at construction so that `mid ± rad` evaluated in plain f64 arithmetic is
/// still an outward enclosure.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    mesh: Mesh,
    col_ptr: Vec<u32>,
    rows: Vec<u32>,
    mid: Vec<f64>,
    rad: Vec<f32>,
}

/// Midpoint/radius form of a nonnegative entry enclosure.
#[inline]
pub(crate) fn pack(e: Interval) -> (f64, f32) {
    let m = e.mid();
    let r = e.rad();
    if r == 0.0 {
        return (m, 0.0);
    }
    let big = m.abs().max(r);
    let ulp = big.next_up() - big;
    let r = add_up(r, ulp);
    let mut r32 = r as f32;
    if (r32 as f64) < r {
        r32 = r32.next_up();
    }
    (m, r32)
}

/// Entry bounds `[max(0, mid - rad), mid + rad]`; valid by the inflation in [`pack`].
#[inline]
pub(crate) fn unpack(m: f64, r: f32) -> (f64, f64) {
    if r == 0.0 {
        (m, m)
    } else {
        let r = r as f64;
        ((m - r).max(0.0), m + r)
    }
}

impl UlamOperator {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn d(&self) -> usize {
        self.mesh.d()
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    /// Entries of column `j` as `(row, enclosure)`, rows ascending.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, Interval)> + '_ {
        let (s, e) = (self.col_ptr[j] as usize, self.col_ptr[j + 1] as usize);
        (s..e).map(move |t| {
            let (lo, hi) = unpack(self.mid[t], self.rad[t]);
            (self.rows[t] as usize, Interval::new(lo, hi))
        })
    }

    /// Entry `P_kj` (zero when not stored).
    pub fn entry(&self, k: usize, j: usize) -> Interval {
        self.column(j).find(|&(r, _)| r == k).map_or(Interval::ZERO, |(_, e)| e)
    }

    pub fn max_entry_width(&self) -> f64 {
        self.mid
            .iter()
            .zip(&self.rad)
            .map(|(&m, &r)| {
                let (lo, hi) = unpack(m, r);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Row-compressed copy: `(row_ptr, cols, entries)`.
    pub fn to_rows(&self) -> RowView {
        let d = self.d();
        let mut row_ptr = vec![0u32; d + 1];
        for &r in &self.rows {
            row_ptr[r as usize + 1] += 1;
        }
        for k in 0..d {
            row_ptr[k + 1] += row_ptr[k];
        }
        let mut fill: Vec<u32> = row_ptr[..d].to_vec();
        let n = self.nnz();
        let mut cols = vec![0u32; n];
        let mut mid = vec![0f64; n];
        let mut rad = vec![0f32; n];
        for j in 0..d {
            for t in self.col_ptr[j] as usize..self.col_ptr[j + 1] as usize {
                let k = self.rows[t] as usize;
                let slot = fill[k] as usize;
                cols[slot] = j as u32;
                mid[slot] = self.mid[t];
                rad[slot] = self.rad[t];
                fill[k] += 1;
            }
        }
        RowView { row_ptr, cols, mid, rad }
    }

    /// Builds the operator from row-major data, verifying every row sum.
    pub(crate) fn from_rows(mesh: Mesh, rows: &RowView) -> Result<Self> {
        let d = mesh.d();
        check_len(d + 1, rows.row_ptr.len())?;
        for k in 0..d {
            let (s, e) = (rows.row_ptr[k] as usize, rows.row_ptr[k + 1] as usize);
            if s > e || e > rows.cols.len() {
                return Err(Error::Cache("corrupt row pointers".into()));
            }
            let mut sum = Interval::ZERO;
            for t in s..e {
                if rows.cols[t] as usize >= d {
                    return Err(Error::Cache(format!("column index {} out of range", rows.cols[t])));
                }
                let (lo, hi) = unpack(rows.mid[t], rows.rad[t]);
                if !(0.0 <= lo && lo <= hi) {
                    return Err(Error::Cache(format!("invalid entry in row {k}")));
                }
                sum += Interval::new(lo, hi);
            }
            if !sum.contains(1.0) {
                return Err(Error::NotStochastic { row: k, sum: sum.to_string() });
            }
        }
        let mut col_ptr = vec![0u32; d + 1];
        for &c in &rows.cols {
            col_ptr[c as usize + 1] += 1;
        }
        for j in 0..d {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill: Vec<u32> = col_ptr[..d].to_vec();
        let n = rows.cols.len();
        let (mut r_idx, mut mid, mut rad) = (vec![0u32; n], vec![0f64; n], vec![0f32; n]);
        for k in 0..d {
            for t in rows.row_ptr[k] as usize..rows.row_ptr[k + 1] as usize {
                let j = rows.cols[t] as usize;
                let slot = fill[j] as usize;
                r_idx[slot] = k as u32;
                mid[slot] = rows.mid[t];
                rad[slot] = rows.rad[t];
                fill[j] += 1;
            }
        }
        Ok(UlamOperator { mesh, col_ptr, rows: r_idx, mid, rad })
    }

    /// Rigorous left product `u ↦ uP`: `out_j ⊇ Σ_k u_k P_kj`.
    pub fn apply(&self, v: &BasisVector) -> Result<BasisVector> {
        check_len(self.d(), v.len())?;
        let u = v.coeffs();
        let mut out = vec![Interval::ZERO; self.d()];
        out.par_chunks_mut(COL_BLOCK).enumerate().for_each(|(b, chunk)| {
            for (i, o) in chunk.iter_mut().enumerate() {
                let j = b * COL_BLOCK + i;
                let (s, e) = (self.col_ptr[j] as usize, self.col_ptr[j + 1] as usize);
                let (mut lo, mut hi) = (0.0, 0.0);
                for t in s..e {
                    let (plo, phi) = unpack(self.mid[t], self.rad[t]);
                    let p = u[self.rows[t] as usize].mul_nonneg(plo, phi);
                    lo = add_down(lo, p.lo());
                    hi = add_up(hi, p.hi());
                }
                *o = Interval::new(lo, hi);
            }
        });
        Ok(BasisVector::new(out))
    }

    /// Floating-point left product with the entry midpoints (heuristics only).
    pub fn apply_f64(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.d());
        let mut out = vec![0.0; self.d()];
        out.par_chunks_mut(COL_BLOCK).enumerate().for_each(|(b, chunk)| {
            for (i, o) in chunk.iter_mut().enumerate() {
                let j = b * COL_BLOCK + i;
                let (s, e) = (self.col_ptr[j] as usize, self.col_ptr[j + 1] as usize);
                *o = (s..e).map(|t| self.mid[t] * u[self.rows[t] as usize]).sum();
            }
        });
        out
    }
}

impl UlamOperator {
    /// Sequential rigorous left product into `out`, same summation order as [`UlamOperator::apply`].
    pub(crate) fn apply_seq_into(&self, u: &[Interval], out: &mut [Interval]) {
        for (j, o) in out.iter_mut().enumerate() {
            let (s, e) = (self.col_ptr[j] as usize, self.col_ptr[j + 1] as usize);
            let (mut lo, mut hi) = (0.0, 0.0);
            for t in s..e {
                let (plo, phi) = unpack(self.mid[t], self.rad[t]);
                let p = u[self.rows[t] as usize].mul_nonneg(plo, phi);
                lo = add_down(lo, p.lo());
                hi = add_up(hi, p.hi());
            }
            *o = Interval::new(lo, hi);
        }
    }

    /// Upper bound of `max_k Σ_j P_kj`, the L¹ operator norm of `u ↦ uP`.
    pub fn max_row_sum(&self) -> f64 {
        let mut sums = vec![0.0f64; self.d()];
        for t in 0..self.nnz() {
            let (_, hi) = unpack(self.mid[t], self.rad[t]);
            let k = self.rows[t] as usize;
            sums[k] = add_up(sums[k], hi);
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Recomputes every row sum from the stored entries and checks that it contains 1.
    pub fn verify_row_sums(&self) -> Result<()> {
        let d = self.d();
        let (mut lo, mut hi) = (vec![0.0f64; d], vec![0.0f64; d]);
        for t in 0..self.nnz() {
            let (a, b) = unpack(self.mid[t], self.rad[t]);
            let k = self.rows[t] as usize;
            lo[k] = add_down(lo[k], a);
            hi[k] = add_up(hi[k], b);
        }
        match (0..d).find(|&k| !(lo[k] <= 1.0 && 1.0 <= hi[k])) {
            Some(row) => Err(Error::NotStochastic { row, sum: format!("[{}, {}]", lo[row], hi[row]) }),
            None => Ok(()),
        }
    }

    /// Floating-point power iteration from the uniform density.
    ///
    /// Returns the normalized iterate (cell masses), the iteration count and the
    /// last floating L¹ change. Stops below `tol` or after `max_iter` steps.
    pub fn power_iterate(&self, tol: f64, max_iter: usize) -> (Vec<f64>, usize, f64) {
        let d = self.d();
        let mut u = vec![1.0 / d as f64; d];
        let mut change = f64::INFINITY;
        let mut iters = 0;
        while iters < max_iter && change >= tol {
            let mut next = self.apply_f64(&u);
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x = x.max(0.0) / s);
            change = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
            u = next;
            iters += 1;
        }
        (u, iters, change)
    }
}

/// Row-compressed view of an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct RowView {
    pub row_ptr: Vec<u32>,
    pub cols: Vec<u32>,
    pub mid: Vec<f64>,
    pub rad: Vec<f32>,
}

impl RowView {
    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        (self.row_ptr[k] as usize..self.row_ptr[k + 1] as usize)
            .map(move |t| (self.cols[t] as usize, unpack(self.mid[t], self.rad[t])))
    }
}

/// Assembles `P_ε` for `map` on `mesh`, certifying that every row sum contains 1.
pub fn assemble(map: &PiecewiseMap, mesh: Mesh) -> Result<UlamOperator> {
    let d = mesh.d();
    let batches: Vec<(usize, usize)> = (0..d).step_by(ROW_BATCH).map(|s| (s, (s + ROW_BATCH).min(d))).collect();

    let mut counts = vec![0u32; d + 1];
    for &(s, e) in &batches {
        let batch = assemble_batch(map, mesh, s, e)?;
        for &(j, _) in &batch.entries {
            counts[j as usize + 1] += 1;
        }
    }
    let mut total: u64 = 0;
    for j in 0..d {
        total += counts[j + 1] as u64;
        if total > u32::MAX as u64 {
            return Err(Error::InvalidMesh(format!("too many nonzeros for d = {d}")));
        }
        counts[j + 1] = total as u32;
    }
    let col_ptr = counts;
    let n = total as usize;
    let mut fill: Vec<u32> = col_ptr[..d].to_vec();
    let (mut rows, mut mid, mut rad) = (vec![0u32; n], vec![0f64; n], vec![0f32; n]);
    for &(s, e) in &batches {
        let batch = assemble_batch(map, mesh, s, e)?;
        for k in s..e {
            for t in batch.row_ptr[k - s]..batch.row_ptr[k - s + 1] {
                let (j, entry) = batch.entries[t];
                let slot = fill[j as usize] as usize;
                rows[slot] = k as u32;
                (mid[slot], rad[slot]) = pack(entry);
                fill[j as usize] += 1;
            }
        }
    }
    Ok(UlamOperator { mesh, col_ptr, rows, mid, rad })
}

type RowRange = (Vec<usize>, Vec<(u32, Interval)>);

struct Batch {
    row_ptr: Vec<usize>,
    entries: Vec<(u32, Interval)>,
}

fn assemble_batch(map: &PiecewiseMap, mesh: Mesh, start: usize, end: usize) -> Result<Batch> {
    const SUB: usize = 1024;
    let parts: Vec<Result<RowRange>> = (start..end)
        .step_by(SUB)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| {
            let e = (s + SUB).min(end);
            let mut lens = Vec::with_capacity(e - s);
            let mut entries = Vec::with_capacity(4 * (e - s));
            let mut scratch = Vec::new();
            for k in s..e {
                let before = entries.len();
                row_entries(map, mesh, k, &mut entries, &mut scratch)?;
                lens.push(entries.len() - before);
            }
            Ok((lens, entries))
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(end - start + 1);
    row_ptr.push(0);
    let mut entries = Vec::new();
    for p in parts {
        let (lens, e) = p?;
        for l in lens {
            row_ptr.push(row_ptr.last().unwrap() + l);
        }
        entries.extend(e);
    }
    Ok(Batch { row_ptr, entries })
}

/// Appends the nonzero entries of row `k`, sorted by column, and checks the row sum.
///
/// For each branch, the part of `I_k` inside the branch domain is cut at the
/// preimages of the grid points its image crosses; the piece lengths times `d`
/// are the entries.
pub(crate) fn row_entries(
    map: &PiecewiseMap,
    mesh: Mesh,
    k: usize,
    out: &mut Vec<(u32, Interval)>,
    xs: &mut Vec<Interval>,
) -> Result<()> {
    let d = mesh.d();
    let d_f = mesh.d_f64();
    let cell = mesh.cell(k);
    let start = out.len();
    for b in map.branches() {
        let (a_end, b_end) = (b.domain_lo(), b.domain_hi());
        if b_end.hi() <= cell.lo() || a_end.lo() >= cell.hi() {
            continue;
        }
        let sl = Interval::point(cell.lo()).max(a_end);
        let sr = Interval::point(cell.hi()).min(b_end);
        if sl.lo() >= sr.hi() {
            continue;
        }
        let f = b.forward();
        let clip = |y: Interval| {
            y.intersect(Interval::UNIT)
                .ok_or_else(|| Error::InvalidMap(format!("row {k}: image {y} outside [0, 1]")))
        };
        let (ya, yb) = (clip(f.eval(sl))?, clip(f.eval(sr))?);
        let (y_low, y_high) = if b.is_increasing() { (ya, yb) } else { (yb, ya) };
        let first = ((y_low.lo() * d_f).floor() as usize).min(d - 1);
        xs.clear();
        xs.push(if b.is_increasing() { sl } else { sr });
        let mut j = first + 1;
        while j < d && (j as f64) < y_high.hi() * d_f {
            let x = b
                .invert_point_near(j as f64 / d_f, sl.lo(), sr.hi())
                .max(sl)
                .min(sr);
            xs.push(x);
            j += 1;
        }
        xs.push(if b.is_increasing() { sr } else { sl });
        for (t, w) in xs.windows(2).enumerate() {
            let len = if b.is_increasing() { w[1] - w[0] } else { w[0] - w[1] };
            let e = len * d_f;
            #[allow(clippy::manual_clamp)] // NaN must map into [0, 1]
            let hi = e.hi().min(1.0).max(0.0);
            let e = Interval::new(e.lo().max(0.0).min(hi), hi);
            if e.hi() > 0.0 {
                out.push(((first + t) as u32, e));
            }
        }
    }
    out[start..].sort_by_key(|&(j, _)| j);
    let mut w = start;
    for r in start..out.len() {
        if w > start && out[w - 1].0 == out[r].0 {
            let e = out[r].1;
            out[w - 1].1 += e;
        } else {
            out[w] = out[r];
            w += 1;
        }
    }
    out.truncate(w);
    let sum: Interval = out[start..].iter().map(|&(_, e)| e).sum();
    if !sum.contains(1.0) {
        return Err(Error::NotStochastic { row: k, sum: sum.to_string() });
    }
    Ok(())
}
