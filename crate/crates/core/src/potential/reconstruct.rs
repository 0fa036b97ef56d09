use serde::Serialize;

use crate::calculus::{covariant_row_closedness, grad_fd, kernel_operator, Stencil1d};
use crate::error::{Error, Result};
use crate::geometry::{kernel_eval, Generator, GeometryModel};
use crate::grid::{Grid2, ScalarField, SymTensorField};
use crate::potential::sparse::{dot, lsq_solve, orthonormalize, Csr, CsrBuilder, LsqReport};

/// Sparse matrix of `E ↦ (∇d + R g)E` (the coordinate Hessian on the flat
/// model) with the same stencils as [`kernel_operator`]. Columns are nodes
/// in row-major `(i, j)` order; rows are `(s11, s12, s22)` per node.
pub fn operator_matrix(grid: &Grid2) -> Csr {
    let (nx, ny) = grid.shape();
    let col = |i: usize, j: usize| i * ny + j;
    let mut b = CsrBuilder::new(nx * ny);
    for (i, j) in grid.nodes() {
        let p = grid.point(i, j);
        let dx = Stencil1d::first(nx, i, grid.hx);
        let dy = Stencil1d::first(ny, j, grid.hy);
        let (gam, rphi) = if grid.model.is_hyperbolic() {
            (Some(grid.model.christoffel_unchecked(p)), grid.model.curvature() * grid.model.conformal_factor_unchecked(p))
        } else {
            (None, 0.0)
        };
        // first-derivative correction −Γ^k_ab ∂_k for component (a, b)
        let christoffel = |b: &mut CsrBuilder, a: usize, c: usize| {
            if let Some(g) = gam {
                for (k, w) in dx.entries() {
                    b.push(col(k, j), -g[0][a][c] * w);
                }
                for (k, w) in dy.entries() {
                    b.push(col(i, k), -g[1][a][c] * w);
                }
            }
        };

        for (k, w) in Stencil1d::second(nx, i, grid.hx).entries() {
            b.push(col(k, j), w);
        }
        christoffel(&mut b, 0, 0);
        if rphi != 0.0 {
            b.push(col(i, j), rphi);
        }
        b.finish_row();

        for (k, wy) in dy.entries() {
            for (m, wx) in Stencil1d::first(nx, i, grid.hx).entries() {
                b.push(col(m, k), wy * wx);
            }
        }
        christoffel(&mut b, 0, 1);
        b.finish_row();

        for (k, w) in Stencil1d::second(ny, j, grid.hy).entries() {
            b.push(col(i, k), w);
        }
        christoffel(&mut b, 1, 1);
        if rphi != 0.0 {
            b.push(col(i, j), rphi);
        }
        b.finish_row();
    }
    b.build()
}

fn tensor_rhs(s: &SymTensorField) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * s.grid.len());
    for (i, j) in s.grid.nodes() {
        out.extend_from_slice(&[s.s11[[i, j]], s.s12[[i, j]], s.s22[[i, j]]]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReconstructionOptions {
    /// Integrability threshold; `None` uses `10 h² sup|S*| / ℓ³`, with `ℓ = 1`
    /// on the flat model and `ℓ = y_min` on the half-plane.
    pub integrability_threshold: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        ReconstructionOptions { integrability_threshold: None, tolerance: 1e-10, max_iterations: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GaugeReport {
    /// `E`, `∂₁E`, `∂₂E` vanish at the base node; `removed` is the affine
    /// part `(∂₁, ∂₂, constant)` that was subtracted.
    PinBasePoint { base: [usize; 2], removed: [f64; 3] },
    /// Normalised inner products `⟨E, k_α⟩ / (‖E‖ ‖k_α‖)`.
    KernelOrthogonal { inner_products: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionResult {
    #[serde(skip)]
    pub potential: ScalarField,
    /// Sup-norm of `operator(E) − S*` over all nodes.
    pub residual: f64,
    pub closedness: f64,
    pub threshold: f64,
    pub gauge: GaugeReport,
    pub solve: LsqReport,
}

/// Integrability residual used as the precondition: coordinate row
/// closedness on the flat model, covariant closedness `d^∇S*` on the
/// half-plane (where exact tensors such as `−g` are not coordinate-closed).
pub fn integrability_residual(s: &SymTensorField) -> f64 {
    covariant_row_closedness(s).max()
}

pub fn default_threshold(s: &SymTensorField) -> f64 {
    let g = &s.grid;
    let len = if g.model.is_hyperbolic() { g.y0 } else { 1.0 };
    10.0 * g.h_max().powi(2) * s.sup_norm() / len.powi(3)
}

fn check_integrable(s: &SymTensorField, opts: &ReconstructionOptions) -> Result<(f64, f64)> {
    let threshold = opts.integrability_threshold.unwrap_or_else(|| default_threshold(s));
    let residual = integrability_residual(s);
    if !(residual <= threshold) {
        return Err(Error::Integrability { residual, threshold });
    }
    Ok((residual, threshold))
}

fn solve(s: &SymTensorField, basis: &[Vec<f64>], opts: &ReconstructionOptions) -> Result<(ScalarField, LsqReport)> {
    let a = operator_matrix(&s.grid);
    let (x, rep) = lsq_solve(&a, &a.transpose(), &tensor_rhs(s), basis, opts.tolerance, opts.max_iterations)?;
    let values = ndarray::Array2::from_shape_vec(s.grid.shape(), x).expect("shape matches");
    Ok((ScalarField::new(s.grid, values)?, rep))
}

fn operator_residual(e: &ScalarField, s: &SymTensorField) -> Result<f64> {
    Ok(kernel_operator(e)?.sub(s)?.sup_norm())
}

/// Least-squares `E` with `hessian_fd(E) = S*`, gauged so that `E` and its
/// gradient vanish at node `(0, 0)`.
pub fn reconstruct_flat(sstar: &SymTensorField, opts: &ReconstructionOptions) -> Result<ReconstructionResult> {
    let g = sstar.grid;
    if g.model != GeometryModel::Flat {
        return Err(Error::InvalidParameter("flat reconstruction needs a flat grid".into()));
    }
    let (closedness, threshold) = check_integrable(sstar, opts)?;
    let affine = orthonormalize(&[
        vec![1.0; g.len()],
        g.nodes().map(|(i, _)| g.x(i)).collect(),
        g.nodes().map(|(_, j)| g.y(j)).collect(),
    ]);
    let (mut e, solve) = solve(sstar, &affine, opts)?;
    let de = grad_fd(&e);
    let (a, b, c) = (de.a1[[0, 0]], de.a2[[0, 0]], e.values[[0, 0]]);
    let (x0, y0) = (g.x0, g.y0);
    for (i, j) in g.nodes() {
        e.values[[i, j]] -= c + a * (g.x(i) - x0) + b * (g.y(j) - y0);
    }
    let residual = operator_residual(&e, sstar)?;
    Ok(ReconstructionResult {
        potential: e,
        residual,
        closedness,
        threshold,
        gauge: GaugeReport::PinBasePoint { base: [0, 0], removed: [a, b, c] },
        solve,
    })
}

pub(crate) fn sampled_kernel(g: &Grid2) -> Vec<Vec<f64>> {
    Generator::ALL
        .iter()
        .map(|&k| g.nodes().map(|(i, j)| kernel_eval(k, g.point(i, j)).expect("grid lies in the half-plane")).collect())
        .collect()
}

/// Least-squares `E` with `(∇d + R g)E = S*` and `⟨E, k_α⟩ = 0`.
pub fn reconstruct_hyperbolic(sstar: &SymTensorField, opts: &ReconstructionOptions) -> Result<ReconstructionResult> {
    let g = sstar.grid;
    if g.model != GeometryModel::HyperbolicHalfPlane {
        return Err(Error::InvalidParameter("hyperbolic reconstruction needs a half-plane grid".into()));
    }
    let (closedness, threshold) = check_integrable(sstar, opts)?;
    let kernel = sampled_kernel(&g);
    let (e, solve) = solve(sstar, &orthonormalize(&kernel), opts)?;
    let flat: Vec<f64> = e.values.iter().copied().collect();
    let en = dot(&flat, &flat).sqrt();
    let mut inner = [0.0; 3];
    for (a, k) in kernel.iter().enumerate() {
        let kn = dot(k, k).sqrt();
        inner[a] = if en > 0.0 { dot(&flat, k) / (en * kn) } else { 0.0 };
    }
    let residual = operator_residual(&e, sstar)?;
    Ok(ReconstructionResult {
        potential: e,
        residual,
        closedness,
        threshold,
        gauge: GaugeReport::KernelOrthogonal { inner_products: inner },
        solve,
    })
}

pub fn reconstruct(sstar: &SymTensorField, opts: &ReconstructionOptions) -> Result<ReconstructionResult> {
    match sstar.grid.model {
        GeometryModel::Flat => reconstruct_flat(sstar, opts),
        GeometryModel::HyperbolicHalfPlane => reconstruct_hyperbolic(sstar, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::hessian_fd;
    use crate::geometry::{Point2, Sym2};
    use crate::potential::presets::analytic_kernel_operator;

    fn flat(n: usize) -> Grid2 {
        Grid2::from_extents(GeometryModel::Flat, [-1.0, 1.0], [-1.0, 1.0], n, n).unwrap()
    }

    fn hyp(n: usize) -> Grid2 {
        Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [-1.0, 1.0], [1.0, 3.0], n, n).unwrap()
    }

    #[test]
    fn matrix_matches_field_operators() {
        for g in [flat(7), hyp(8)] {
            let f = ScalarField::from_fn(g, |p| (p.x * 1.3).sin() * p.y.powi(3) + p.x * p.y);
            let op = kernel_operator(&f).unwrap();
            let x: Vec<f64> = f.values.iter().copied().collect();
            let y = operator_matrix(&g).matvec(&x);
            for (n, (i, j)) in g.nodes().enumerate() {
                let s = op.at(i, j);
                for (k, v) in [s.s11, s.s12, s.s22].into_iter().enumerate() {
                    assert!((y[3 * n + k] - v).abs() < 1e-9 * (1.0 + v.abs()), "{:?} {k}", (i, j));
                }
            }
        }
        let f = ScalarField::from_fn(flat(6), |p| p.x * p.x * p.y);
        assert_eq!(kernel_operator(&f).unwrap(), hessian_fd(&f));
    }

    #[test]
    fn constant_dual_stress_gives_quadratic() {
        let g = flat(33);
        let s = SymTensorField::from_fn(g, |_| Sym2::new(-0.5, 0.0, 0.5));
        let r = reconstruct_flat(&s, &ReconstructionOptions::default()).unwrap();
        let exact = |p: Point2| (p.y * p.y - p.x * p.x) / 4.0;
        // compare modulo the affine gauge: pin the oracle the same way
        let (x0, y0) = (g.x0, g.y0);
        let pinned = |p: Point2| exact(p) - exact(Point2::new(x0, y0)) - (-x0 / 2.0) * (p.x - x0) - (y0 / 2.0) * (p.y - y0);
        let err = g.nodes().map(|(i, j)| (r.potential.values[[i, j]] - pinned(g.point(i, j))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn zero_tensor_gives_zero_potential() {
        let r = reconstruct_flat(&SymTensorField::zeros(flat(9)), &Default::default()).unwrap();
        assert!(r.potential.sup_norm() == 0.0);
        let r = reconstruct_hyperbolic(&SymTensorField::zeros(hyp(9)), &Default::default()).unwrap();
        assert!(r.potential.sup_norm() == 0.0);
    }

    #[test]
    fn manufactured_flat_recovery() {
        let f = |p: Point2| p.x.sin() * p.y.cos();
        let err = |n| {
            let g = flat(n);
            let exact = ScalarField::from_fn(g, f);
            let s = SymTensorField::from_fn(g, |p| Sym2::new(-f(p), -p.x.cos() * p.y.sin(), -f(p)));
            let r = reconstruct_flat(&s, &Default::default()).unwrap();
            // remove the least-squares affine part of the difference, then compare
            let mut d: Vec<f64> = g.nodes().map(|(i, j)| r.potential.values[[i, j]] - exact.values[[i, j]]).collect();
            let affine = orthonormalize(&[
                vec![1.0; g.len()],
                g.nodes().map(|(i, _)| g.x(i)).collect(),
                g.nodes().map(|(_, j)| g.y(j)).collect(),
            ]);
            crate::potential::sparse::project_out(&mut d, &affine);
            d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 < 1e-3 && (e1 / e2).log2() > 1.7, "{e1} {e2}");
    }

    #[test]
    fn discrete_hessian_is_recovered_to_solver_tolerance() {
        let g = flat(24);
        let f = ScalarField::from_fn(g, |p| (2.0 * p.x).sin() * p.y.exp() + p.x * p.x * p.y);
        let r = reconstruct_flat(&hessian_fd(&f), &Default::default()).unwrap();
        assert!(r.residual < 1e-7 * hessian_fd(&f).sup_norm(), "{}", r.residual);
    }

    #[test]
    fn non_closed_tensor_is_rejected() {
        let g = flat(17);
        let s = SymTensorField::from_fn(g, |p| Sym2::new(p.y, 0.0, 0.0));
        assert!(matches!(reconstruct_flat(&s, &Default::default()), Err(Error::Integrability { .. })));
        let h = hyp(17);
        let s = SymTensorField::from_fn(h, |p| Sym2::new(p.y, 0.0, 0.0));
        assert!(matches!(reconstruct_hyperbolic(&s, &Default::default()), Err(Error::Integrability { .. })));
    }

    #[test]
    fn minus_metric_gives_deflated_constant() {
        // oracle: 1 minus its projection onto the sampled kernel, which spans
        // the discrete null space only up to O(h²)
        let err = |n| {
            let g = hyp(n);
            let s = SymTensorField::from_fn(g, |p| g.model.metric_at(p).unwrap().scale(-1.0));
            let r = reconstruct_hyperbolic(&s, &Default::default()).unwrap();
            let q = orthonormalize(&sampled_kernel(&g));
            let mut one = vec![1.0; g.len()];
            crate::potential::sparse::project_out(&mut one, &q);
            let e = g.nodes().enumerate().map(|(n, (i, j))| (r.potential.values[[i, j]] - one[n]).abs()).fold(0.0, f64::max);
            (e, r)
        };
        let ((e1, _), (e2, r)) = (err(17), err(33));
        assert!(e1 < 1e-3 && (e1 / e2).log2() > 1.0, "{e1} {e2}");
        if let GaugeReport::KernelOrthogonal { inner_products } = r.gauge {
            assert!(inner_products.iter().all(|v| v.abs() < 1e-10));
        } else {
            panic!("wrong gauge");
        }
    }

    #[test]
    fn manufactured_hyperbolic_recovery() {
        let f = |x: crate::jet::Jet2, y: crate::jet::Jet2| (x * y).sin() + y.ln();
        let err = |n| {
            let g = hyp(n);
            let op = analytic_kernel_operator(f);
            let s = SymTensorField::from_fn(g, |p| op(p));
            let r = reconstruct_hyperbolic(&s, &Default::default()).unwrap();
            let exact: Vec<f64> = g.nodes().map(|(i, j)| {
                let p = g.point(i, j);
                f(crate::jet::Jet2::constant(p.x), crate::jet::Jet2::constant(p.y)).v
            }).collect();
            let mut d: Vec<f64> = r.potential.values.iter().zip(&exact).map(|(a, b)| a - b).collect();
            crate::potential::sparse::project_out(&mut d, &orthonormalize(&sampled_kernel(&g)));
            d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e1 < 5e-2 && (e1 / e2).log2() > 1.7, "{e1} {e2}");
    }
}
