//! Rectangular node lattices and the scalar, covector and symmetric-tensor
//! fields sampled on them.
//!
//! Arrays are indexed `[i, j]` with `i` along x and `j` along y, so that
//! node `(i, j)` sits at `(x0 + i·hx, y0 + j·hy)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Covector, GeometryModel, Point2, Sym2};

pub const MIN_NODES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub model: GeometryModel,
}

impl Grid2 {
    pub fn new(
        model: GeometryModel,
        origin: Point2,
        hx: f64,
        hy: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::GridTooSmall { nx, ny, min: MIN_NODES });
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacings must be positive, got hx={hx}, hy={hy}"
            )));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        if model.is_hyperbolic() && origin.y <= 0.0 {
            return Err(Error::DomainViolation { x: origin.x, y: origin.y });
        }
        Ok(Grid2 { x0: origin.x, y0: origin.y, hx, hy, nx, ny, model })
    }

    /// Grid with `nx × ny` nodes spanning `[x_min, x_max] × [y_min, y_max]`.
    pub fn from_extents(
        model: GeometryModel,
        x_range: [f64; 2],
        y_range: [f64; 2],
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::GridTooSmall { nx, ny, min: MIN_NODES });
        }
        let hx = (x_range[1] - x_range[0]) / (nx - 1) as f64;
        let hy = (y_range[1] - y_range[0]) / (ny - 1) as f64;
        Grid2::new(model, Point2::new(x_range[0], y_range[0]), hx, hy, nx, ny)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.x(i), self.y(j))
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn h_max(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nx).flat_map(move |i| (0..self.ny).map(move |j| (i, j)))
    }

    pub fn contains(&self, p: Point2) -> bool {
        let tol_x = 1e-12 * self.hx;
        let tol_y = 1e-12 * self.hy;
        p.x >= self.x0 - tol_x
            && p.x <= self.x_max() + tol_x
            && p.y >= self.y0 - tol_y
            && p.y <= self.y_max() + tol_y
    }

    /// Nearest node to `p`, if `p` lies inside the grid rectangle.
    pub fn nearest_node(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let i = ((p.x - self.x0) / self.hx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.y0) / self.hy).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        Some((i, j))
    }

    /// Cell index and local coordinates in `[0, 1]²` for bilinear interpolation.
    fn locate(&self, p: Point2) -> Result<(usize, usize, f64, f64)> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        let fx = ((p.x - self.x0) / self.hx).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.y0) / self.hy).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Ok((i, j, fx - i as f64, fy - j as f64))
    }

    pub(crate) fn bilinear(&self, a: &Array2<f64>, p: Point2) -> Result<f64> {
        let (i, j, s, t) = self.locate(p)?;
        Ok((1.0 - s) * (1.0 - t) * a[[i, j]]
            + s * (1.0 - t) * a[[i + 1, j]]
            + (1.0 - s) * t * a[[i, j + 1]]
            + s * t * a[[i + 1, j + 1]])
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.nx, self.ny))
    }

    pub fn sample(&self, f: impl Fn(Point2) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.nx, self.ny), |(i, j)| f(self.point(i, j)))
    }
}

/// A horizontal branch cut between node rows `row` and `row + 1`, across
/// columns `col_start..col_end`.
///
/// A lifted field jumps by `jump` when crossing the cut upwards; stencils
/// that straddle the cut subtract the jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchCut {
    pub row: usize,
    pub col_start: usize,
    pub col_end: usize,
    pub jump: f64,
}

impl BranchCut {
    /// Correction to add to the value at `(i, j)` when seen from row `j_ref`.
    #[inline]
    pub fn offset(&self, i: usize, j_ref: usize, j: usize) -> f64 {
        if i < self.col_start || i >= self.col_end {
            return 0.0;
        }
        if j_ref <= self.row && j > self.row {
            -self.jump
        } else if j <= self.row && j_ref > self.row {
            self.jump
        } else {
            0.0
        }
    }

    #[inline]
    pub fn crosses_cell(&self, i: usize, j: usize) -> bool {
        j == self.row && i >= self.col_start && i + 1 < self.col_end
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2,
    pub values: Array2<f64>,
    pub cut: Option<BranchCut>,
}

impl ScalarField {
    pub fn new(grid: Grid2, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("scalar field has non-finite values".into()));
        }
        Ok(ScalarField { grid, values, cut: None })
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(Point2) -> f64) -> Self {
        ScalarField { grid, values: grid.sample(f), cut: None }
    }

    pub fn zeros(grid: Grid2) -> Self {
        ScalarField { grid, values: grid.zeros(), cut: None }
    }

    pub fn with_cut(mut self, cut: BranchCut) -> Result<Self> {
        if cut.row + 1 >= self.grid.ny || cut.col_end > self.grid.nx || cut.col_start > cut.col_end {
            return Err(Error::InvalidParameter(format!("branch cut {cut:?} does not fit the grid")));
        }
        self.cut = Some(cut);
        Ok(self)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Value at `(i, j)` continued from row `j_ref` across any branch cut.
    #[inline]
    pub fn seen_from(&self, i: usize, j_ref: usize, j: usize) -> f64 {
        let v = self.values[[i, j]];
        match &self.cut {
            Some(c) => v + c.offset(i, j_ref, j),
            None => v,
        }
    }

    pub fn interpolate(&self, p: Point2) -> Result<f64> {
        if self.cut.is_some() {
            return Err(Error::Unsupported(
                "interpolation of a field with a branch cut".into(),
            ));
        }
        self.grid.bilinear(&self.values, p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    pub grid: Grid2,
    pub a1: Array2<f64>,
    pub a2: Array2<f64>,
}

impl OneFormField {
    pub fn new(grid: Grid2, a1: Array2<f64>, a2: Array2<f64>) -> Result<Self> {
        if a1.dim() != grid.shape() || a2.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        Ok(OneFormField { grid, a1, a2 })
    }

    pub fn zeros(grid: Grid2) -> Self {
        OneFormField { grid, a1: grid.zeros(), a2: grid.zeros() }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(Point2) -> Covector) -> Self {
        let mut out = OneFormField::zeros(grid);
        for (i, j) in grid.nodes() {
            let c = f(grid.point(i, j));
            out.a1[[i, j]] = c.0[0];
            out.a2[[i, j]] = c.0[1];
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Covector {
        Covector([self.a1[[i, j]], self.a2[[i, j]]])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: Covector) {
        self.a1[[i, j]] = c.0[0];
        self.a2[[i, j]] = c.0[1];
    }

    pub fn map(&self, f: impl Fn(Point2, Covector) -> Covector) -> OneFormField {
        let mut out = OneFormField::zeros(self.grid);
        for (i, j) in self.grid.nodes() {
            out.set(i, j, f(self.grid.point(i, j), self.at(i, j)));
        }
        out
    }

    pub fn interpolate(&self, p: Point2) -> Result<Covector> {
        Ok(Covector([
            self.grid.bilinear(&self.a1, p)?,
            self.grid.bilinear(&self.a2, p)?,
        ]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    pub grid: Grid2,
    pub s11: Array2<f64>,
    pub s12: Array2<f64>,
    pub s22: Array2<f64>,
}

impl SymTensorField {
    pub fn new(grid: Grid2, s11: Array2<f64>, s12: Array2<f64>, s22: Array2<f64>) -> Result<Self> {
        if s11.dim() != grid.shape() || s12.dim() != grid.shape() || s22.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        Ok(SymTensorField { grid, s11, s12, s22 })
    }

    pub fn zeros(grid: Grid2) -> Self {
        SymTensorField { grid, s11: grid.zeros(), s12: grid.zeros(), s22: grid.zeros() }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(Point2) -> Sym2) -> Self {
        let mut out = SymTensorField::zeros(grid);
        for (i, j) in grid.nodes() {
            out.set(i, j, f(grid.point(i, j)));
        }
        out
    }

    /// The metric tensor of the grid's model sampled at every node.
    pub fn metric(grid: Grid2) -> Self {
        SymTensorField::from_fn(grid, |p| {
            let phi = grid.model.conformal_factor_unchecked(p);
            Sym2::diag(phi, phi)
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Sym2 {
        Sym2::new(self.s11[[i, j]], self.s12[[i, j]], self.s22[[i, j]])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, s: Sym2) {
        self.s11[[i, j]] = s.s11;
        self.s12[[i, j]] = s.s12;
        self.s22[[i, j]] = s.s22;
    }

    pub fn component(&self, a: usize, b: usize) -> &Array2<f64> {
        match (a, b) {
            (0, 0) => &self.s11,
            (1, 1) => &self.s22,
            _ => &self.s12,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.s11
            .iter()
            .chain(self.s12.iter())
            .chain(self.s22.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn interpolate(&self, p: Point2) -> Result<Sym2> {
        Ok(Sym2::new(
            self.grid.bilinear(&self.s11, p)?,
            self.grid.bilinear(&self.s12, p)?,
            self.grid.bilinear(&self.s22, p)?,
        ))
    }

    pub fn sub(&self, other: &SymTensorField) -> Result<SymTensorField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(SymTensorField {
            grid: self.grid,
            s11: &self.s11 - &other.s11,
            s12: &self.s12 - &other.s12,
            s22: &self.s22 - &other.s22,
        })
    }
}

/// A set of nodes over which residual norms are taken.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    mask: Array2<bool>,
}

impl Region {
    pub fn all(grid: &Grid2) -> Self {
        Region { mask: Array2::from_elem(grid.shape(), true) }
    }

    /// Nodes at least `margin` nodes away from the grid boundary.
    pub fn interior(grid: &Grid2, margin: usize) -> Self {
        let mask = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            i >= margin && j >= margin && i + margin < grid.nx && j + margin < grid.ny
        });
        Region { mask }
    }

    pub fn from_mask(mask: Array2<bool>) -> Self {
        Region { mask }
    }

    pub fn from_predicate(grid: &Grid2, f: impl Fn(Point2) -> bool) -> Self {
        Region { mask: Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.point(i, j))) }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region { mask: ndarray::Zip::from(&self.mask).and(&other.mask).map_collect(|&a, &b| a && b) }
    }

    /// Keep nodes whose whole `k`-neighbourhood (Chebyshev distance) is in the region.
    pub fn erode(&self, k: usize) -> Region {
        let (nx, ny) = self.mask.dim();
        let mask = Array2::from_shape_fn((nx, ny), |(i, j)| {
            if i < k || j < k || i + k >= nx || j + k >= ny {
                return false;
            }
            (i - k..=i + k).all(|a| (j - k..=j + k).all(|b| self.mask[[a, b]]))
        });
        Region { mask }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .indexed_iter()
            .filter(|(_, &b)| b)
            .map(|((i, j), _)| (i, j))
    }

    /// Sup-norm of `a` over the region (zero for an empty region).
    pub fn sup(&self, a: &Array2<f64>) -> f64 {
        self.nodes().fold(0.0f64, |m, (i, j)| m.max(a[[i, j]].abs()))
    }
}
