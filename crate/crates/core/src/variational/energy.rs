use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Covector, GeometryModel};
use crate::grid::{OneFormField, ScalarField};
use crate::variational::domain::Domain;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// The weighted p-Dirichlet energy `∫ w |du|^p` with `w = 1` on the flat
/// plane and `w = y^{p−2}` on the half-plane (the conformal weight of
/// `|du|_g^p dA_g`). `epsilon` regularises `|du|` near critical points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PDirichletSpec {
    pub p: f64,
    pub model: GeometryModel,
    pub epsilon: f64,
}

impl PDirichletSpec {
    pub fn new(p: f64, model: GeometryModel) -> Result<Self> {
        Self::with_epsilon(p, model, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(p: f64, model: GeometryModel, epsilon: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent p must be finite and at least 2, got {p}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be non-negative, got {epsilon}")));
        }
        Ok(PDirichletSpec { p, model, epsilon })
    }

    #[inline]
    pub fn weight(&self, y: f64) -> f64 {
        match self.model {
            GeometryModel::Flat => 1.0,
            GeometryModel::HyperbolicHalfPlane => y.powf(self.p - 2.0),
        }
    }

    /// The current `w |du|_ε^{p−2} du` whose divergence is the Euler–Lagrange operator.
    pub fn flux(&self, y: f64, du: Covector) -> Covector {
        let [a, b] = du.0;
        let q = a * a + b * b + self.epsilon * self.epsilon;
        let c = self.weight(y) * q.powf(0.5 * self.p - 1.0);
        Covector([c * a, c * b])
    }
}

/// Cell quadrature of the energy. On each active cell the squared gradient
/// is the mean of the squared edge differences,
/// `½(δx_bottom² + δx_top²) + ½(δy_left² + δy_right²)`,
/// which reduces to the five-point Laplacian at `p = 2` and couples all
/// four corners (a cell-centred gradient would leave checkerboard modes
/// with zero energy).
pub struct DirichletEnergy<'a> {
    pub spec: PDirichletSpec,
    pub domain: &'a Domain,
}

struct CellTerms {
    energy: f64,
    /// ∂e/∂u at corners (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    grad: [f64; 4],
}

impl<'a> DirichletEnergy<'a> {
    pub fn new(spec: PDirichletSpec, domain: &'a Domain) -> Result<Self> {
        if spec.model != domain.grid.model {
            return Err(Error::InvalidParameter("energy model differs from the grid model".into()));
        }
        Ok(DirichletEnergy { spec, domain })
    }

    #[inline]
    fn corners(&self, u: &Array2<f64>, i: usize, j: usize) -> [f64; 4] {
        let off = |ii: usize| self.domain.cut.map_or(0.0, |c| c.offset(ii, j, j + 1));
        [u[[i, j]], u[[i + 1, j]], u[[i, j + 1]] + off(i), u[[i + 1, j + 1]] + off(i + 1)]
    }

    #[inline]
    fn cell(&self, u: &Array2<f64>, i: usize, j: usize, with_grad: bool) -> CellTerms {
        let g = &self.domain.grid;
        let [u00, u10, u01, u11] = self.corners(u, i, j);
        let (hx, hy) = (g.hx, g.hy);
        let ab = (u10 - u00) / hx;
        let at = (u11 - u01) / hx;
        let bl = (u01 - u00) / hy;
        let br = (u11 - u10) / hy;
        let eps2 = self.spec.epsilon * self.spec.epsilon;
        let q = 0.5 * (ab * ab + at * at) + 0.5 * (bl * bl + br * br) + eps2;
        let w = self.spec.weight(g.y0 + (j as f64 + 0.5) * hy) * hx * hy;
        let p = self.spec.p;
        let energy = w * q.powf(0.5 * p);
        let grad = if with_grad {
            let f = w * 0.5 * p * q.powf(0.5 * p - 1.0);
            [
                f * (-ab / hx - bl / hy),
                f * (ab / hx - br / hy),
                f * (-at / hx + bl / hy),
                f * (at / hx + br / hy),
            ]
        } else {
            [0.0; 4]
        };
        CellTerms { energy, grad }
    }

    pub fn value(&self, u: &Array2<f64>) -> f64 {
        let (nx, ny) = self.domain.grid.shape();
        let mut e = 0.0;
        for i in 0..nx - 1 {
            for j in 0..ny - 1 {
                if self.domain.cell_active(i, j) {
                    e += self.cell(u, i, j, false).energy;
                }
            }
        }
        e
    }

    /// Energy and its exact gradient with respect to every nodal value
    /// (including fixed nodes, which callers usually ignore).
    pub fn value_and_gradient(&self, u: &Array2<f64>) -> (f64, Array2<f64>) {
        let (nx, ny) = self.domain.grid.shape();
        let mut e = 0.0;
        let mut grad = Array2::zeros((nx, ny));
        for i in 0..nx - 1 {
            for j in 0..ny - 1 {
                if !self.domain.cell_active(i, j) {
                    continue;
                }
                let c = self.cell(u, i, j, true);
                e += c.energy;
                grad[[i, j]] += c.grad[0];
                grad[[i + 1, j]] += c.grad[1];
                grad[[i, j + 1]] += c.grad[2];
                grad[[i + 1, j + 1]] += c.grad[3];
            }
        }
        (e, grad)
    }

    /// Scale turning `∂E/∂u` at a node into a pointwise Euler–Lagrange
    /// residual `div(w |du|^{p−2} du)` (so `u = x²` at `p = 2` gives 2).
    pub fn residual_scale(&self) -> f64 {
        -1.0 / (self.spec.p * self.domain.grid.cell_area())
    }

    /// Pointwise Euler–Lagrange residual at free nodes, zero at fixed nodes.
    pub fn residual(&self, u: &Array2<f64>) -> Array2<f64> {
        let (_, mut g) = self.value_and_gradient(u);
        let s = self.residual_scale();
        for ((i, j), v) in g.indexed_iter_mut() {
            *v = if self.domain.is_fixed(i, j) { 0.0 } else { s * *v };
        }
        g
    }
}

/// Discrete energy of `u` with the whole grid boundary treated as fixed.
pub fn energy_total(spec: &PDirichletSpec, u: &ScalarField) -> Result<f64> {
    let mut domain = Domain::rectangle(u.grid);
    domain.cut = u.cut;
    Ok(DirichletEnergy::new(*spec, &domain)?.value(&u.values))
}

/// Euler–Lagrange residual of `u` at interior grid nodes.
pub fn el_residual_2d(spec: &PDirichletSpec, u: &ScalarField) -> Result<ScalarField> {
    let mut domain = Domain::rectangle(u.grid);
    domain.cut = u.cut;
    let r = DirichletEnergy::new(*spec, &domain)?.residual(&u.values);
    ScalarField::new(u.grid, r)
}

/// Nodal current `w |du|_ε^{p−2} du` from finite-difference gradients.
pub fn flux_field(spec: &PDirichletSpec, du: &OneFormField) -> OneFormField {
    du.map(|p, c| spec.flux(p.y, c))
}
