use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grid::{BranchCut, Grid2, Region, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Annulus {
    pub center: Point2,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Annulus {
    pub fn contains_open(&self, p: Point2) -> bool {
        let r = (p - self.center).norm();
        r > self.r_inner && r < self.r_outer
    }
}

/// Which nodes are unknowns, plus the geometry of the computational domain.
///
/// Fixed nodes carry Dirichlet data. On an annulus every node outside the
/// open annulus is fixed, so the curved boundary is imposed through the
/// data at the nearest lattice nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub grid: Grid2,
    fixed: Array2<bool>,
    pub annulus: Option<Annulus>,
    pub cut: Option<BranchCut>,
}

impl Domain {
    pub fn rectangle(grid: Grid2) -> Self {
        let fixed = Array2::from_shape_fn(grid.shape(), |(i, j)| grid.is_boundary(i, j));
        Domain { grid, fixed, annulus: None, cut: None }
    }

    pub fn annulus(grid: Grid2, annulus: Annulus) -> Result<Self> {
        if !(annulus.r_inner > 0.0 && annulus.r_outer > annulus.r_inner) {
            return Err(Error::InvalidParameter(format!(
                "annulus radii must satisfy 0 < r_inner < r_outer, got {} and {}",
                annulus.r_inner, annulus.r_outer
            )));
        }
        let fixed = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            grid.is_boundary(i, j) || !annulus.contains_open(grid.point(i, j))
        });
        if fixed.iter().all(|&f| f) {
            return Err(Error::InvalidParameter("annulus contains no grid nodes".into()));
        }
        Ok(Domain { grid, fixed, annulus: Some(annulus), cut: None })
    }

    #[inline]
    pub fn is_fixed(&self, i: usize, j: usize) -> bool {
        self.fixed[[i, j]]
    }

    pub fn free_nodes(&self) -> Vec<(usize, usize)> {
        self.grid.nodes().filter(|&(i, j)| !self.fixed[[i, j]]).collect()
    }

    pub fn free_region(&self) -> Region {
        Region::from_mask(self.fixed.mapv(|f| !f))
    }

    /// A cell takes part in the energy when at least one corner is free.
    #[inline]
    pub fn cell_active(&self, i: usize, j: usize) -> bool {
        !(self.fixed[[i, j]] && self.fixed[[i + 1, j]] && self.fixed[[i, j + 1]] && self.fixed[[i + 1, j + 1]])
    }
}

/// Dirichlet data: values at fixed nodes, and the starting guess at free nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    pub domain: Domain,
    pub values: ScalarField,
}

impl BoundarySpec {
    /// Grid boundary fixed to `f`; free nodes start at zero.
    pub fn rectangle(grid: Grid2, f: impl Fn(Point2) -> f64) -> Self {
        let domain = Domain::rectangle(grid);
        let values = ScalarField::from_fn(grid, |p| f(p));
        let mut bc = BoundarySpec { domain, values };
        bc.reset_free(0.0);
        bc
    }

    /// Nodes outside the open annulus fixed to `f`; free nodes start at zero.
    pub fn annulus(grid: Grid2, annulus: Annulus, f: impl Fn(Point2) -> f64) -> Result<Self> {
        let domain = Domain::annulus(grid, annulus)?;
        let values = ScalarField::from_fn(grid, |p| f(p));
        let mut bc = BoundarySpec { domain, values };
        bc.reset_free(0.0);
        Ok(bc)
    }

    pub fn reset_free(&mut self, v: f64) {
        for (i, j) in self.domain.free_nodes() {
            self.values.values[[i, j]] = v;
        }
    }

    pub fn with_initial_guess(mut self, f: impl Fn(Point2) -> f64) -> Self {
        let g = self.domain.grid;
        for (i, j) in self.domain.free_nodes() {
            self.values.values[[i, j]] = f(g.point(i, j));
        }
        self
    }

    /// Add `c` to every fixed value (and to the starting guess).
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.values.mapv_inplace(|v| v + c);
        out
    }
}

/// Place a branch cut for a circle-valued map of winding `winding` on an
/// annulus domain: the cut runs from the centre towards −x between the two
/// node rows that bracket the centre, and the lifted field jumps by
/// `2π · winding` across it.
pub fn lift_annulus(bc: &BoundarySpec, winding: i32) -> Result<BoundarySpec> {
    let annulus = bc.domain.annulus.ok_or_else(|| {
        Error::InvalidParameter("a winding number needs an annulus domain".into())
    })?;
    if winding == 0 {
        return Ok(bc.clone());
    }
    let cut = annulus_cut(&bc.domain.grid, annulus.center, winding)?;
    let mut out = bc.clone();
    out.domain.cut = Some(cut);
    out.values.cut = Some(cut);
    Ok(out)
}

fn annulus_cut(grid: &Grid2, center: Point2, winding: i32) -> Result<BranchCut> {
    let fy = (center.y - grid.y0) / grid.hy;
    if fy < 0.0 || fy >= (grid.ny - 1) as f64 {
        return Err(Error::InvalidParameter("annulus centre must lie inside the grid".into()));
    }
    let row = fy.floor() as usize;
    let col_end = (0..grid.nx).take_while(|&i| grid.x(i) < center.x).count();
    Ok(BranchCut { row, col_start: 0, col_end, jump: TAU * winding as f64 })
}

/// The lifted angle `winding · θ` consistent with the cut placed by
/// [`lift_annulus`]: values below the cut use the branch `θ ∈ [−π, 0]`.
pub fn angular_lift(grid: &Grid2, center: Point2, winding: i32) -> impl Fn(Point2) -> f64 {
    let row_y = grid.y(((center.y - grid.y0) / grid.hy).floor().max(0.0) as usize);
    let w = winding as f64;
    move |p: Point2| {
        let mut t = (p.y - center.y).atan2(p.x - center.x);
        if p.y <= row_y + 1e-12 && t > 0.5 * PI {
            t -= TAU;
        }
        w * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryModel;

    fn grid(n: usize) -> Grid2 {
        Grid2::from_extents(GeometryModel::Flat, [-1.0, 1.0], [-1.0, 1.0], n, n).unwrap()
    }

    #[test]
    fn rectangle_fixes_boundary_only() {
        let d = Domain::rectangle(grid(6));
        assert_eq!(d.free_nodes().len(), 16);
        assert!((0..5).all(|i| (0..5).all(|j| d.cell_active(i, j))));
    }

    #[test]
    fn annulus_masks_hole_and_exterior() {
        let a = Annulus { center: Point2::new(0.0, 0.0), r_inner: 0.3, r_outer: 0.9 };
        let d = Domain::annulus(grid(40), a).unwrap();
        for &(i, j) in &d.free_nodes() {
            let r = d.grid.point(i, j).norm();
            assert!(r > 0.3 && r < 0.9);
        }
        assert!(!d.cell_active(19, 19));
        assert!(Domain::annulus(grid(10), Annulus { r_inner: 0.5, r_outer: 0.4, ..a }).is_err());
    }

    #[test]
    fn winding_requires_annulus() {
        let bc = BoundarySpec::rectangle(grid(8), |p| p.x);
        assert!(lift_annulus(&bc, 1).is_err());
        let a = Annulus { center: Point2::new(0.0, 0.0), r_inner: 0.3, r_outer: 0.9 };
        let bc = BoundarySpec::annulus(grid(20), a, |_| 0.0).unwrap();
        let lifted = lift_annulus(&bc, 0).unwrap();
        assert_eq!(lifted, bc);
        let lifted = lift_annulus(&bc, -2).unwrap();
        let cut = lifted.domain.cut.unwrap();
        assert_eq!(cut.jump, -2.0 * TAU);
        assert_eq!(cut.row, 9);
        assert_eq!(cut.col_end, 10);
    }

    #[test]
    fn angular_lift_is_continuous_away_from_cut() {
        let g = grid(20);
        let f = angular_lift(&g, Point2::new(0.0, 0.0), 1);
        let cut = annulus_cut(&g, Point2::new(0.0, 0.0), 1).unwrap();
        let field = ScalarField::from_fn(g, &f).with_cut(cut).unwrap();
        // away from the centre, vertical neighbours across the cut are close once the jump is removed
        for i in 0..7 {
            let d = field.seen_from(i, 9, 10) - field.get(i, 9);
            assert!(d.abs() < 1.0, "column {i}: {d}");
        }
    }
}
