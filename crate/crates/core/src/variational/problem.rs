use ndarray::Array2;

use crate::error::Result;
use crate::grid::ScalarField;
use crate::variational::domain::BoundarySpec;
use crate::variational::energy::{DirichletEnergy, PDirichletSpec};
use crate::variational::solver::{minimize, ConvergenceReport, Objective, SolverConfig};

/// The energy restricted to free nodes, with fixed nodes held at their data.
struct FreeNodeEnergy<'a> {
    energy: DirichletEnergy<'a>,
    base: &'a Array2<f64>,
    free: Vec<(usize, usize)>,
}

impl FreeNodeEnergy<'_> {
    fn scatter(&self, x: &[f64]) -> Array2<f64> {
        let mut u = self.base.clone();
        for (&(i, j), &v) in self.free.iter().zip(x) {
            u[[i, j]] = v;
        }
        u
    }
}

impl Objective for FreeNodeEnergy<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.energy.value(&self.scatter(x))
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let (e, full) = self.energy.value_and_gradient(&self.scatter(x));
        for (gk, &(i, j)) in g.iter_mut().zip(&self.free) {
            *gk = full[[i, j]];
        }
        e
    }

    fn residual_norm(&self, g: &[f64]) -> f64 {
        self.energy.residual_scale().abs() * g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Minimise the discrete p-Dirichlet energy subject to the boundary data,
/// starting from the free-node values stored in `bc`.
pub fn solve_dirichlet(
    spec: &PDirichletSpec,
    bc: &BoundarySpec,
    cfg: &SolverConfig,
) -> Result<(ScalarField, ConvergenceReport)> {
    let energy = DirichletEnergy::new(*spec, &bc.domain)?;
    let free = bc.domain.free_nodes();
    let x0 = free.iter().map(|&(i, j)| bc.values.values[[i, j]]).collect();
    let obj = FreeNodeEnergy { energy, base: &bc.values.values, free };
    let (x, report) = minimize(&obj, x0, cfg)?;
    let mut field = ScalarField::new(bc.values.grid, obj.scatter(&x))?;
    field.cut = bc.domain.cut;
    Ok((field, report))
}
