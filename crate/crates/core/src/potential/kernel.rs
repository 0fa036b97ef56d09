use nalgebra::{DMatrix, DVector, Matrix3};
use serde::Serialize;

use crate::calculus::hessian_fd;
use crate::error::{Error, Result};
use crate::geometry::{kernel_eval, kernel_jet, Generator, GeometryModel, Point2, Sym2};
use crate::grid::{Grid2, Region, ScalarField};

/// Three-function bases onto which monodromy differences are projected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// `(k₀, k₁, k₂) = (x/y, 1/y, (x²+y²)/y)`.
    HyperbolicKernel,
    /// `(x, y, 1)`, the affine kernel of the flat Hessian.
    Affine,
}

impl Basis {
    pub fn eval(self, p: Point2) -> Result<[f64; 3]> {
        match self {
            Basis::HyperbolicKernel => Ok([
                kernel_eval(Generator::Dilation, p)?,
                kernel_eval(Generator::Translation, p)?,
                kernel_eval(Generator::Special, p)?,
            ]),
            Basis::Affine => Ok([p.x, p.y, 1.0]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelProjection {
    pub coefficients: [f64; 3],
    /// Sup-norm of `f − Σ a_α b_α` over the samples.
    pub residual: f64,
    /// Condition number of the Gram matrix of the column-normalised basis.
    pub condition: f64,
}

pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Least-squares fit of sampled values against a three-function basis.
pub fn fit_basis(basis: Basis, points: &[Point2], values: &[f64]) -> Result<KernelProjection> {
    if points.len() != values.len() || points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least three samples with matching values, got {} points and {} values",
            points.len(),
            values.len()
        )));
    }
    let rows: Vec<[f64; 3]> = points.iter().map(|&p| basis.eval(p)).collect::<Result<_>>()?;
    let mut a = DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
    let norms: Vec<f64> = (0..3).map(|c| a.column(c).norm()).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::DegenerateBasis { condition: f64::INFINITY });
    }
    for (c, n) in norms.iter().enumerate() {
        a.column_mut(c).scale_mut(1.0 / n);
    }
    let gram: Matrix3<f64> = {
        let g = a.transpose() * &a;
        Matrix3::from_fn(|r, c| g[(r, c)])
    };
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::DegenerateBasis { condition });
    }
    let b = DVector::from_column_slice(values);
    let z = a.clone().svd(true, true).solve(&b, 0.0).map_err(|e| Error::Unsupported(e.to_string()))?;
    let coefficients = [z[0] / norms[0], z[1] / norms[1], z[2] / norms[2]];
    let residual = rows
        .iter()
        .zip(values)
        .map(|(r, v)| (v - (coefficients[0] * r[0] + coefficients[1] * r[1] + coefficients[2] * r[2])).abs())
        .fold(0.0, f64::max);
    Ok(KernelProjection { coefficients, residual, condition })
}

/// Fit a grid function over `region` (every node if `None`) against `{k₀, k₁, k₂}`.
pub fn project_to_kernel(f: &ScalarField, region: Option<&Region>) -> Result<KernelProjection> {
    if !f.grid.model.is_hyperbolic() {
        return Err(Error::InvalidParameter("kernel projection needs a half-plane grid".into()));
    }
    let all = Region::all(&f.grid);
    let region = region.unwrap_or(&all);
    let nodes: Vec<(usize, usize)> = region.nodes().collect();
    let points: Vec<Point2> = nodes.iter().map(|&(i, j)| f.grid.point(i, j)).collect();
    let values: Vec<f64> = nodes.iter().map(|&(i, j)| f.values[[i, j]]).collect();
    fit_basis(Basis::HyperbolicKernel, &points, &values)
}

fn require_hyperbolic(grid: &Grid2) -> Result<()> {
    if grid.model != GeometryModel::HyperbolicHalfPlane {
        return Err(Error::InvalidParameter("kernel residuals need a half-plane grid".into()));
    }
    Ok(())
}

fn operator_from_parts(p: Point2, value: f64, grad: [f64; 2], hess: Sym2) -> (Sym2, f64) {
    let model = GeometryModel::HyperbolicHalfPlane;
    let c = model.christoffel_unchecked(p);
    let rg = model.curvature() * model.conformal_factor_unchecked(p) * value;
    let corr = |a: usize, b: usize| c[0][a][b] * grad[0] + c[1][a][b] * grad[1];
    let out = Sym2::new(hess.s11 - corr(0, 0) + rg, hess.s12 - corr(0, 1), hess.s22 - corr(1, 1) + rg);
    let scale = hess.norm_inf().max(corr(0, 0).abs()).max(corr(0, 1).abs()).max(corr(1, 1).abs()).max(rg.abs());
    (out, scale)
}

/// `sup |(∇d + Rg)k_α| / sup(term size)` over every node, all derivatives in closed form.
pub fn kernel_residual_analytic(grid: &Grid2, alpha: Generator) -> Result<f64> {
    require_hyperbolic(grid)?;
    let (mut res, mut scale) = (0.0f64, 0.0f64);
    for (i, j) in grid.nodes() {
        let p = grid.point(i, j);
        let k = kernel_jet(alpha, p)?;
        let (op, s) = operator_from_parts(p, k.value, k.grad.0, k.hessian);
        res = res.max(op.norm_inf());
        scale = scale.max(s);
    }
    Ok(if scale > 0.0 { res / scale } else { res })
}

/// Sup over interior nodes of `(∇d + Rg)k_α` with finite-difference second
/// derivatives and closed-form first derivatives.
pub fn kernel_residual_fd(grid: &Grid2, alpha: Generator) -> Result<f64> {
    require_hyperbolic(grid)?;
    let k = ScalarField::from_fn(*grid, |p| kernel_eval(alpha, p).expect("grid lies in the half-plane"));
    let hess = hessian_fd(&k);
    let mut res = 0.0f64;
    for (i, j) in Region::interior(grid, 1).nodes() {
        let p = grid.point(i, j);
        let jet = kernel_jet(alpha, p)?;
        let (op, _) = operator_from_parts(p, jet.value, jet.grad.0, hess.at(i, j));
        res = res.max(op.norm_inf());
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(n: usize) -> Grid2 {
        Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [-2.0, 2.0], [0.5, 4.0], n, n).unwrap()
    }

    #[test]
    fn analytic_residuals_vanish() {
        let g = patch(41);
        for a in Generator::ALL {
            assert!(kernel_residual_analytic(&g, a).unwrap() <= 1e-12);
        }
        let flat = Grid2::from_extents(GeometryModel::Flat, [0.0, 1.0], [0.0, 1.0], 4, 4).unwrap();
        assert!(kernel_residual_analytic(&flat, Generator::Dilation).is_err());
    }

    #[test]
    fn fd_residual_converges() {
        let g = |n| Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [-2.0, 2.0], [1.0, 4.0], n, n).unwrap();
        for a in Generator::ALL {
            let (r1, r2) = (kernel_residual_fd(&g(33), a).unwrap(), kernel_residual_fd(&g(65), a).unwrap());
            assert!((r1 / r2).log2() > 1.5, "{a:?}: {r1} {r2}");
        }
    }

    #[test]
    fn projection_examples() {
        let g = patch(21);
        let k = |a: Generator| ScalarField::from_fn(g, move |p| kernel_eval(a, p).unwrap());
        let f = ScalarField::new(g, 2.0 * &k(Generator::Dilation).values - &k(Generator::Special).values).unwrap();
        let pr = project_to_kernel(&f, None).unwrap();
        assert!((pr.coefficients[0] - 2.0).abs() < 1e-10 && pr.coefficients[1].abs() < 1e-10);
        assert!((pr.coefficients[2] + 1.0).abs() < 1e-10 && pr.residual < 1e-10);
        let pr = project_to_kernel(&k(Generator::Translation), None).unwrap();
        assert!((pr.coefficients[1] - 1.0).abs() < 1e-10 && pr.coefficients[0].abs() < 1e-10);
        let pr = project_to_kernel(&ScalarField::from_fn(g, |p| p.y), None).unwrap();
        assert!(pr.residual > 1e-2);
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        // all samples on one vertical line y ↦ (0, 1/y, y): k₀ vanishes identically
        let pts: Vec<Point2> = (1..10).map(|k| Point2::new(0.0, k as f64)).collect();
        let vals = vec![1.0; pts.len()];
        assert!(matches!(fit_basis(Basis::HyperbolicKernel, &pts, &vals), Err(Error::DegenerateBasis { .. })));
    }

    #[test]
    fn affine_fit_is_exact() {
        let pts: Vec<Point2> = (0..12).map(|k| Point2::new((k % 4) as f64 * 0.3, (k / 4) as f64 * 0.7)).collect();
        let vals: Vec<f64> = pts.iter().map(|p| 1.5 * p.x - 0.25 * p.y + 3.0).collect();
        let f = fit_basis(Basis::Affine, &pts, &vals).unwrap();
        assert!((f.coefficients[0] - 1.5).abs() < 1e-12 && (f.coefficients[1] + 0.25).abs() < 1e-12);
        assert!((f.coefficients[2] - 3.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn projection_is_idempotent(a0 in -3.0f64..3.0, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0) {
            let g = patch(11);
            let f = ScalarField::from_fn(g, |p| {
                let b = Basis::HyperbolicKernel.eval(p).unwrap();
                a0 * b[0] + a1 * b[1] + a2 * b[2]
            });
            let pr = project_to_kernel(&f, None).unwrap();
            for (c, e) in pr.coefficients.iter().zip([a0, a1, a2]) {
                proptest::prop_assert!((c - e).abs() < 1e-10);
            }
        }
    }
}
