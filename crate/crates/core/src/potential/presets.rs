//! Built-in analytic inputs: manufactured potentials and the tensors they
//! generate, evaluated exactly with second-order jets.

use std::f64::consts::TAU;

use crate::geometry::{GeometryModel, Point2, Sym2};
use crate::jet::Jet2;

/// `p ↦ (∇d + R g)F (p)` on the half-plane, from the exact jet of `F`.
pub fn analytic_kernel_operator(f: impl Fn(Jet2, Jet2) -> Jet2) -> impl Fn(Point2) -> Sym2 {
    move |p: Point2| {
        let j = f(Jet2::x(p), Jet2::y(p));
        let model = GeometryModel::HyperbolicHalfPlane;
        let c = model.christoffel_unchecked(p);
        let rg = model.curvature() * model.conformal_factor_unchecked(p) * j.v;
        let corr = |a: usize, b: usize| c[0][a][b] * j.dx + c[1][a][b] * j.dy;
        Sym2::new(j.dxx - corr(0, 0) + rg, j.dxy - corr(0, 1), j.dyy - corr(1, 1) + rg)
    }
}

/// `E = (log r / log λ) · x/y`: multivalued on the cylinder `H²/⟨γ⟩` with
/// `E∘γ − E = x/y`.
pub fn cylinder_potential(lambda: f64) -> impl Fn(Jet2, Jet2) -> Jet2 + Copy {
    let c = 1.0 / lambda.ln();
    move |x: Jet2, y: Jet2| ((x * x + y * y).ln().scale(0.5 * c)) * (x / y)
}

/// A dilation-invariant potential, odd in `x`: `xy / (x² + y²)`.
pub fn invariant_potential() -> impl Fn(Jet2, Jet2) -> Jet2 + Copy {
    |x: Jet2, y: Jet2| (x * y) / (x * x + y * y)
}

/// `αx² + sin(2πx/L₁) sin(2πy/L₂)`: quadratic growth plus a periodic part.
pub fn torus_quadratic(alpha: f64, periods: [f64; 2]) -> impl Fn(Point2) -> f64 + Copy {
    move |p: Point2| alpha * p.x * p.x + (TAU * p.x / periods[0]).sin() * (TAU * p.y / periods[1]).sin()
}

/// `βxy + cos(2πx/L₁) sin(2πy/L₂)`.
pub fn torus_bilinear(beta: f64, periods: [f64; 2]) -> impl Fn(Point2) -> f64 + Copy {
    move |p: Point2| beta * p.x * p.y + (TAU * p.x / periods[0]).cos() * (TAU * p.y / periods[1]).sin()
}
