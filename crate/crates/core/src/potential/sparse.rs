use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Compressed sparse rows. The transpose is kept alongside so that both
/// products parallelise over rows with a fixed summation order.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Row-by-row builder; duplicate column entries within a row are summed.
pub struct CsrBuilder {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    row: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new(ncols: usize) -> Self {
        CsrBuilder { ncols, indptr: vec![0], indices: Vec::new(), values: Vec::new(), row: Vec::new() }
    }

    pub fn push(&mut self, col: usize, v: f64) {
        debug_assert!(col < self.ncols);
        self.row.push((col, v));
    }

    pub fn finish_row(&mut self) {
        self.row.sort_unstable_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in &self.row {
            if last == Some(c) {
                *self.values.last_mut().expect("entry exists") += v;
            } else {
                self.indices.push(c);
                self.values.push(v);
                last = Some(c);
            }
        }
        self.row.clear();
        self.indptr.push(self.indices.len());
    }

    pub fn build(self) -> Csr {
        Csr { nrows: self.indptr.len() - 1, ncols: self.ncols, indptr: self.indptr, indices: self.indices, values: self.values }
    }
}

const PAR_THRESHOLD: usize = 4096;

impl Csr {
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for k in 0..self.ncols {
            counts[k + 1] += counts[k];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Csr { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, values }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let row_dot = |r: usize| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>();
        if self.nrows >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            out[c] += v * v;
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis (modified Gram–Schmidt, two passes) of the span of
/// `vectors`; near-dependent vectors are dropped.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let norm0 = dot(v, v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let n = dot(&w, &w).sqrt();
        if n > 1e-10 * norm0 && n > 0.0 {
            w.iter_mut().for_each(|wi| *wi /= n);
            basis.push(w);
        }
    }
    basis
}

/// Remove the components along an orthonormal `basis`.
pub fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(xi, qi)| *xi -= c * qi);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsqReport {
    pub iterations: usize,
    /// `‖Mᵀr‖ / ‖Mᵀb‖` for the deflated, column-scaled operator `M`.
    pub normal_residual: f64,
    /// `‖A x − b‖₂ / ‖b‖₂`.
    pub relative_residual: f64,
}

/// Least-squares solve of `A x ≈ b` with `x` orthogonal to `deflate`.
///
/// Conjugate gradients on the normal equations (CGLS) for the operator
/// `M = A P D`, with `P` the projector off the deflation space and `D` the
/// Jacobi column scaling; the solution is `x = P D z`.
pub fn lsq_solve(
    a: &Csr,
    at: &Csr,
    b: &[f64],
    deflate: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LsqReport)> {
    let n = a.ncols;
    let scale: Vec<f64> = a.column_norms_sq().iter().map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 1.0 }).collect();
    let apply_m = |z: &[f64], out: &mut [f64], tmp: &mut Vec<f64>| {
        tmp.iter_mut().zip(z).zip(&scale).for_each(|((t, zi), s)| *t = zi * s);
        project_out(tmp, deflate);
        a.matvec_into(tmp, out);
    };
    let apply_mt = |r: &[f64], out: &mut [f64]| {
        at.matvec_into(r, out);
        project_out(out, deflate);
        out.iter_mut().zip(&scale).for_each(|(o, s)| *o *= s);
    };

    let bnorm = dot(b, b).sqrt();
    let mut z = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = vec![0.0; n];
    apply_mt(&r, &mut s);
    let s0 = dot(&s, &s).sqrt();
    let mut report = LsqReport { iterations: 0, normal_residual: 0.0, relative_residual: if bnorm > 0.0 { 1.0 } else { 0.0 } };
    if s0 == 0.0 {
        return Ok((vec![0.0; n], report));
    }
    let mut p = s.clone();
    let mut q = vec![0.0; a.nrows];
    let mut gamma = dot(&s, &s);
    let mut k = 0;
    let mut rel = 1.0;
    while k < max_iter {
        k += 1;
        apply_m(&p, &mut q, &mut tmp);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        z.iter_mut().zip(&p).for_each(|(zi, pi)| *zi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        apply_mt(&r, &mut s);
        let gamma_new = dot(&s, &s);
        rel = gamma_new.sqrt() / s0;
        if !rel.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        if rel <= tol {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    let mut x: Vec<f64> = z.iter().zip(&scale).map(|(zi, s)| zi * s).collect();
    project_out(&mut x, deflate);
    let ax = a.matvec(&x);
    let res: f64 = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    report = LsqReport { iterations: k, normal_residual: rel, relative_residual: if bnorm > 0.0 { res / bnorm } else { res } };
    if rel > tol {
        return Err(Error::LinearSolve { iterations: k, residual: rel });
    }
    Ok((x, report))
}
