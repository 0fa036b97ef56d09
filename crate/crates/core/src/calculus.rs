//! Finite-difference exterior and covariant calculus on node-centred grids.
//!
//! First derivatives use central differences in the interior and
//! second-order one-sided differences on the boundary. Second derivatives use
//! the three-point stencil in the interior and the four-point one-sided
//! stencil on the boundary (three-point when an axis has only three nodes).
//! All stencils are exact on quadratics at interior nodes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Covector, Point2, Sym2};
use crate::grid::{Grid2, OneFormField, Region, ScalarField, SymTensorField};

/// One row of a 1D difference operator: up to four `(index, weight)` pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil1d {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil1d {
    fn from_slice(entries: &[(usize, f64)]) -> Self {
        let mut s = Stencil1d { idx: [0; 4], w: [0.0; 4], len: entries.len() };
        for (k, &(i, w)) in entries.iter().enumerate() {
            s.idx[k] = i;
            s.w[k] = w;
        }
        s
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }

    /// First derivative at index `i` of an axis with `n ≥ 3` nodes and spacing `h`.
    pub fn first(n: usize, i: usize, h: f64) -> Self {
        let c = 1.0 / (2.0 * h);
        if i == 0 {
            Self::from_slice(&[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
        } else if i + 1 == n {
            Self::from_slice(&[(n - 3, c), (n - 2, -4.0 * c), (n - 1, 3.0 * c)])
        } else {
            Self::from_slice(&[(i - 1, -c), (i + 1, c)])
        }
    }

    /// Second derivative at index `i`.
    pub fn second(n: usize, i: usize, h: f64) -> Self {
        let c = 1.0 / (h * h);
        if i > 0 && i + 1 < n {
            Self::from_slice(&[(i - 1, c), (i, -2.0 * c), (i + 1, c)])
        } else if n < 4 {
            Self::from_slice(&[(0, c), (1, -2.0 * c), (2, c)])
        } else if i == 0 {
            Self::from_slice(&[(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)])
        } else {
            Self::from_slice(&[(n - 4, -c), (n - 3, 4.0 * c), (n - 2, -5.0 * c), (n - 1, 2.0 * c)])
        }
    }
}

/// `∂_x a` of a plain nodal array.
pub fn diff_x(grid: &Grid2, a: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(grid.shape(), |(i, j)| {
        Stencil1d::first(grid.nx, i, grid.hx).entries().map(|(k, w)| w * a[[k, j]]).sum()
    })
}

/// `∂_y a` of a plain nodal array.
pub fn diff_y(grid: &Grid2, a: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(grid.shape(), |(i, j)| {
        Stencil1d::first(grid.ny, j, grid.hy).entries().map(|(k, w)| w * a[[i, k]]).sum()
    })
}

fn diff_x_scalar(f: &ScalarField) -> Array2<f64> {
    // x-stencils never cross a horizontal cut
    diff_x(&f.grid, &f.values)
}

fn diff_y_scalar(f: &ScalarField) -> Array2<f64> {
    let g = &f.grid;
    Array2::from_shape_fn(g.shape(), |(i, j)| {
        Stencil1d::first(g.ny, j, g.hy).entries().map(|(k, w)| w * f.seen_from(i, j, k)).sum()
    })
}

/// Discrete `d` on functions.
pub fn grad_fd(f: &ScalarField) -> OneFormField {
    OneFormField { grid: f.grid, a1: diff_x_scalar(f), a2: diff_y_scalar(f) }
}

/// Coordinate Hessian `∂_i∂_j f`, with the mixed term as `∂_y(∂_x f)`.
pub fn hessian_fd(f: &ScalarField) -> SymTensorField {
    let g = f.grid;
    let s11 = Array2::from_shape_fn(g.shape(), |(i, j)| {
        Stencil1d::second(g.nx, i, g.hx).entries().map(|(k, w)| w * f.values[[k, j]]).sum()
    });
    let s22 = Array2::from_shape_fn(g.shape(), |(i, j)| {
        Stencil1d::second(g.ny, j, g.hy).entries().map(|(k, w)| w * f.seen_from(i, j, k)).sum()
    });
    let s12 = diff_y(&g, &diff_x_scalar(f));
    SymTensorField { grid: g, s11, s12, s22 }
}

/// Covariant Hessian `∇dE_ij = ∂_i∂_jE − Γ^k_ij ∂_kE`.
pub fn covariant_hessian(f: &ScalarField) -> Result<SymTensorField> {
    let g = f.grid;
    let mut h = hessian_fd(f);
    if !g.model.is_hyperbolic() {
        return Ok(h);
    }
    let df = grad_fd(f);
    for (i, j) in g.nodes() {
        let c = g.model.christoffel_unchecked(g.point(i, j));
        let (fx, fy) = (df.a1[[i, j]], df.a2[[i, j]]);
        h.s11[[i, j]] -= c[0][0][0] * fx + c[1][0][0] * fy;
        h.s12[[i, j]] -= c[0][0][1] * fx + c[1][0][1] * fy;
        h.s22[[i, j]] -= c[0][1][1] * fx + c[1][1][1] * fy;
    }
    Ok(h)
}

/// `(∇d + R g) E` on the grid's model.
pub fn kernel_operator(f: &ScalarField) -> Result<SymTensorField> {
    let g = f.grid;
    let mut h = covariant_hessian(f)?;
    let r = g.model.curvature();
    if r != 0.0 {
        for (i, j) in g.nodes() {
            let phi = g.model.conformal_factor_unchecked(g.point(i, j));
            let v = r * phi * f.values[[i, j]];
            h.s11[[i, j]] += v;
            h.s22[[i, j]] += v;
        }
    }
    Ok(h)
}

/// Sup-norms of the coordinate exterior derivative of each row of `S`
/// viewed as a one-form: row 1 is `(s11, s12)`, row 2 is `(s12, s22)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct RowClosedness {
    pub row1: f64,
    pub row2: f64,
}

impl RowClosedness {
    pub fn max(&self) -> f64 {
        self.row1.max(self.row2)
    }
}

pub fn row_closedness(s: &SymTensorField) -> RowClosedness {
    row_closedness_on(s, &Region::interior(&s.grid, 1))
}

pub fn row_closedness_on(s: &SymTensorField, region: &Region) -> RowClosedness {
    let g = &s.grid;
    let r1 = diff_x(g, &s.s12) - diff_y(g, &s.s11);
    let r2 = diff_x(g, &s.s22) - diff_y(g, &s.s12);
    RowClosedness { row1: region.sup(&r1), row2: region.sup(&r2) }
}

/// Covariant exterior derivative of `S` viewed as a `T*M`-valued one-form,
/// `(d^∇S)_j = ∂_1 S_2j − ∂_2 S_1j − Γ^l_1j S_2l + Γ^l_2j S_1l`.
///
/// Coincides with [`row_closedness`] on the flat model.
pub fn covariant_row_closedness(s: &SymTensorField) -> RowClosedness {
    covariant_row_closedness_on(s, &Region::interior(&s.grid, 1))
}

pub fn covariant_row_closedness_on(s: &SymTensorField, region: &Region) -> RowClosedness {
    let g = &s.grid;
    let mut r1 = diff_x(g, &s.s12) - diff_y(g, &s.s11);
    let mut r2 = diff_x(g, &s.s22) - diff_y(g, &s.s12);
    if g.model.is_hyperbolic() {
        for (i, j) in g.nodes() {
            let c = g.model.christoffel_unchecked(g.point(i, j));
            let t = s.at(i, j);
            for (jj, r) in [(0usize, &mut r1), (1usize, &mut r2)] {
                let mut corr = 0.0;
                for l in 0..2 {
                    corr += -c[l][0][jj] * t.get(1, l) + c[l][1][jj] * t.get(0, l);
                }
                r[[i, j]] += corr;
            }
        }
    }
    RowClosedness { row1: region.sup(&r1), row2: region.sup(&r2) }
}

/// Discrete curl of a one-form on each cell: the trapezoidal loop integral
/// around the cell divided by its area.
pub fn plaquette_curl(a: &OneFormField) -> Array2<f64> {
    let g = &a.grid;
    Array2::from_shape_fn((g.nx - 1, g.ny - 1), |(i, j)| {
        let bottom = 0.5 * g.hx * (a.a1[[i, j]] + a.a1[[i + 1, j]]);
        let right = 0.5 * g.hy * (a.a2[[i + 1, j]] + a.a2[[i + 1, j + 1]]);
        let top = 0.5 * g.hx * (a.a1[[i, j + 1]] + a.a1[[i + 1, j + 1]]);
        let left = 0.5 * g.hy * (a.a2[[i, j]] + a.a2[[i, j + 1]]);
        (bottom + right - top - left) / g.cell_area()
    })
}

/// Sup over cells with all four corners at interior nodes of the discrete curl.
pub fn closedness_residual(a: &OneFormField) -> f64 {
    closedness_residual_on(a, &Region::interior(&a.grid, 1))
}

/// Sup over cells whose four corners lie in `region`.
pub fn closedness_residual_on(a: &OneFormField, region: &Region) -> f64 {
    let curl = plaquette_curl(a);
    curl.indexed_iter()
        .filter(|((i, j), _)| {
            region.contains(*i, *j)
                && region.contains(i + 1, *j)
                && region.contains(*i, j + 1)
                && region.contains(i + 1, j + 1)
        })
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
}

/// `(D*S)_j = −g^ik (∂_i S_kj − Γ^l_ik S_lj − Γ^l_ij S_kl)`.
///
/// On the flat model this is minus the row divergence of `S`.
pub fn covariant_divergence(s: &SymTensorField) -> OneFormField {
    let g = s.grid;
    let d1: [Array2<f64>; 3] = [diff_x(&g, &s.s11), diff_x(&g, &s.s12), diff_x(&g, &s.s22)];
    let d2: [Array2<f64>; 3] = [diff_y(&g, &s.s11), diff_y(&g, &s.s12), diff_y(&g, &s.s22)];
    let comp = |a: usize, b: usize| if a == b { 2 * a } else { 1 };
    let mut out = OneFormField::zeros(g);
    for (i, j) in g.nodes() {
        let p = g.point(i, j);
        let inv_phi = 1.0 / g.model.conformal_factor_unchecked(p);
        let c = g.model.christoffel_unchecked(p);
        let t = s.at(i, j);
        let mut res = [0.0; 2];
        for (jj, r) in res.iter_mut().enumerate() {
            let mut acc = d1[comp(0, jj)][[i, j]] + d2[comp(1, jj)][[i, j]];
            for k in 0..2 {
                for l in 0..2 {
                    acc -= c[l][k][k] * t.get(l, jj) + c[l][k][jj] * t.get(k, l);
                }
            }
            *r = -inv_phi * acc;
        }
        out.set(i, j, Covector(res));
    }
    out
}

/// Trapezoidal line integral of `a` along a closed polyline, with the
/// components interpolated bilinearly at sub-steps no longer than half a
/// grid spacing.
pub fn loop_integral(a: &OneFormField, path: &[Point2]) -> Result<f64> {
    let g = &a.grid;
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) if path.len() >= 2 => (*f, *l),
        _ => return Err(Error::InvalidParameter("path needs at least two points".into())),
    };
    let tol = 1e-9 * g.hx.min(g.hy);
    if (first - last).norm() > tol {
        return Err(Error::OpenPath { first: (first.x, first.y), last: (last.x, last.y) });
    }
    path_integral(a, path)
}

pub(crate) fn path_integral(a: &OneFormField, path: &[Point2]) -> Result<f64> {
    let g = &a.grid;
    let step = 0.5 * g.hx.min(g.hy);
    let mut total = 0.0;
    for seg in path.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let d = q - p;
        let m = ((d.norm() / step).ceil() as usize).max(1);
        let mut prev = a.interpolate(p)?;
        let mut seg_sum = 0.0;
        for k in 1..=m {
            let pt = if k == m { q } else { p + (k as f64 / m as f64) * d };
            let cur = a.interpolate(pt)?;
            seg_sum += 0.5 * ((prev.0[0] + cur.0[0]) * d.x + (prev.0[1] + cur.0[1]) * d.y) / m as f64;
            prev = cur;
        }
        total += seg_sum;
    }
    Ok(total)
}

/// Counter-clockwise polygon through the grid nodes nearest to `vertices`
/// equally spaced points of the circle of radius `r` around `center`.
/// The returned path is closed.
pub fn circle_path(grid: &Grid2, center: Point2, r: f64, vertices: usize) -> Result<Vec<Point2>> {
    if !(r > 0.0) || vertices < 3 {
        return Err(Error::InvalidParameter(format!(
            "circle needs r > 0 and at least 3 vertices (r={r}, vertices={vertices})"
        )));
    }
    let mut nodes: Vec<(usize, usize)> = Vec::with_capacity(vertices + 1);
    for k in 0..vertices {
        let t = std::f64::consts::TAU * k as f64 / vertices as f64;
        let p = center + r * Point2::new(t.cos(), t.sin());
        let n = grid.nearest_node(p).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
        if nodes.last() != Some(&n) {
            nodes.push(n);
        }
    }
    while nodes.len() > 1 && nodes.last() == nodes.first() {
        nodes.pop();
    }
    let mut path: Vec<Point2> = nodes.iter().map(|&(i, j)| grid.point(i, j)).collect();
    path.push(path[0]);
    Ok(path)
}

/// Maximum of the nodewise difference between a sampled tensor and an analytic one.
pub fn tensor_error_on(s: &SymTensorField, region: &Region, exact: impl Fn(Point2) -> Sym2) -> f64 {
    region
        .nodes()
        .map(|(i, j)| (s.at(i, j) - exact(s.grid.point(i, j))).norm_inf())
        .fold(0.0, f64::max)
}
