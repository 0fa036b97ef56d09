//! Analytic geometry of the flat plane and of the upper half-plane with the
//! metric `g = (dx² + dy²) / y²` (curvature −1).
//!
//! Everything here is closed-form: Killing fields, kernel functions and
//! their derivatives are evaluated exactly so that discretization error can
//! be isolated in the grid modules.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryModel {
    Flat,
    #[serde(alias = "hyperbolic")]
    HyperbolicHalfPlane,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// Components `(a₁, a₂)` of a one-form `a₁ dx + a₂ dy`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Covector(pub [f64; 2]);

/// Components of a tangent vector `v¹ ∂_x + v² ∂_y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tangent(pub [f64; 2]);

impl Neg for Tangent {
    type Output = Tangent;
    fn neg(self) -> Tangent {
        Tangent([-self.0[0], -self.0[1]])
    }
}

impl Add for Tangent {
    type Output = Tangent;
    fn add(self, o: Tangent) -> Tangent {
        Tangent([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Tangent {
    pub fn norm_inf(self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }
}

/// Symmetric 2×2 matrix stored as `(s11, s12, s22)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2::new(0.0, 0.0, 0.0);

    pub const fn new(s11: f64, s12: f64, s22: f64) -> Self {
        Sym2 { s11, s12, s22 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Sym2::new(a, 0.0, b)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.s11,
            (1, 1) => self.s22,
            _ => self.s12,
        }
    }

    pub fn trace(&self) -> f64 {
        self.s11 + self.s22
    }

    pub fn norm_inf(&self) -> f64 {
        self.s11.abs().max(self.s12.abs()).max(self.s22.abs())
    }

    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2::new(c * self.s11, c * self.s12, c * self.s22)
    }

    /// `S v` as a covector: `(S v)_i = S_ij v^j`.
    pub fn contract(&self, v: Tangent) -> Covector {
        Covector([
            self.s11 * v.0[0] + self.s12 * v.0[1],
            self.s12 * v.0[0] + self.s22 * v.0[1],
        ])
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.s11 + o.s11, self.s12 + o.s12, self.s22 + o.s22)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.s11 - o.s11, self.s12 - o.s12, self.s22 - o.s22)
    }
}

/// Christoffel symbols `Γ^k_ij`, indexed `[k][i][j]`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

impl GeometryModel {
    /// Constant Gaussian curvature of the model.
    pub fn curvature(self) -> f64 {
        match self {
            GeometryModel::Flat => 0.0,
            GeometryModel::HyperbolicHalfPlane => -1.0,
        }
    }

    pub fn is_hyperbolic(self) -> bool {
        self == GeometryModel::HyperbolicHalfPlane
    }

    pub fn check_point(self, p: Point2) -> Result<()> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite point ({}, {})",
                p.x, p.y
            )));
        }
        if self.is_hyperbolic() && p.y <= 0.0 {
            return Err(Error::DomainViolation { x: p.x, y: p.y });
        }
        Ok(())
    }

    /// Conformal factor `φ` with `g = φ (dx² + dy²)`.
    pub fn conformal_factor(self, p: Point2) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.conformal_factor_unchecked(p))
    }

    #[inline]
    pub(crate) fn conformal_factor_unchecked(self, p: Point2) -> f64 {
        match self {
            GeometryModel::Flat => 1.0,
            GeometryModel::HyperbolicHalfPlane => 1.0 / (p.y * p.y),
        }
    }

    pub fn metric_at(self, p: Point2) -> Result<Sym2> {
        let phi = self.conformal_factor(p)?;
        Ok(Sym2::diag(phi, phi))
    }

    pub fn inverse_metric_at(self, p: Point2) -> Result<Sym2> {
        let phi = self.conformal_factor(p)?;
        Ok(Sym2::diag(1.0 / phi, 1.0 / phi))
    }

    pub fn christoffel_at(self, p: Point2) -> Result<Christoffel> {
        self.check_point(p)?;
        Ok(self.christoffel_unchecked(p))
    }

    #[inline]
    pub(crate) fn christoffel_unchecked(self, p: Point2) -> Christoffel {
        let mut c = [[[0.0; 2]; 2]; 2];
        if self.is_hyperbolic() {
            let inv = 1.0 / p.y;
            // Γ^x_xy = Γ^x_yx = −1/y
            c[0][0][1] = -inv;
            c[0][1][0] = -inv;
            // Γ^y_xx = 1/y, Γ^y_yy = −1/y
            c[1][0][0] = inv;
            c[1][1][1] = -inv;
        }
        c
    }

    /// Raise the index of a one-form.
    pub fn sharp(self, a: Covector, p: Point2) -> Result<Tangent> {
        let inv_phi = 1.0 / self.conformal_factor(p)?;
        Ok(Tangent([inv_phi * a.0[0], inv_phi * a.0[1]]))
    }

    /// Lower the index of a tangent vector.
    pub fn flat(self, v: Tangent, p: Point2) -> Result<Covector> {
        let phi = self.conformal_factor(p)?;
        Ok(Covector([phi * v.0[0], phi * v.0[1]]))
    }
}

/// Hodge star on one-forms, `*dx = −dy`, `*dy = dx`.
///
/// In two dimensions the star on one-forms only depends on the conformal
/// class, so the same map serves both models.
#[inline]
pub fn hodge_star(a: Covector) -> Covector {
    Covector([a.0[1], -a.0[0]])
}

/// The three generators of the isometry algebra of H², paired with the
/// kernel functions that are their Hamiltonians (up to sign).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// ω₀ = x ∂_x + y ∂_y, kernel function k₀ = x/y.
    Dilation,
    /// ω₁ = ∂_x, kernel function k₁ = 1/y.
    Translation,
    /// ω₂ = (x² − y²) ∂_x + 2xy ∂_y, kernel function k₂ = (x² + y²)/y.
    Special,
}

impl Generator {
    pub const ALL: [Generator; 3] = [
        Generator::Dilation,
        Generator::Translation,
        Generator::Special,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Generator> {
        Generator::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("generator index {i} not in 0..3")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Generator::Dilation => "omega0",
            Generator::Translation => "omega1",
            Generator::Special => "omega2",
        }
    }
}

pub fn killing_eval(g: Generator, p: Point2) -> Tangent {
    let Point2 { x, y } = p;
    match g {
        Generator::Dilation => Tangent([x, y]),
        Generator::Translation => Tangent([1.0, 0.0]),
        Generator::Special => Tangent([x * x - y * y, 2.0 * x * y]),
    }
}

/// Jacobian `∂_j ω^i`, indexed `[i][j]`.
pub fn killing_jacobian(g: Generator, p: Point2) -> [[f64; 2]; 2] {
    let Point2 { x, y } = p;
    match g {
        Generator::Dilation => [[1.0, 0.0], [0.0, 1.0]],
        Generator::Translation => [[0.0, 0.0], [0.0, 0.0]],
        Generator::Special => [[2.0 * x, -2.0 * y], [2.0 * y, 2.0 * x]],
    }
}

/// Value, gradient and Hessian of a kernel function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelJet {
    pub value: f64,
    pub grad: Covector,
    pub hessian: Sym2,
}

pub fn kernel_eval(g: Generator, p: Point2) -> Result<f64> {
    Ok(kernel_jet(g, p)?.value)
}

pub fn kernel_grad(g: Generator, p: Point2) -> Result<Covector> {
    Ok(kernel_jet(g, p)?.grad)
}

pub fn kernel_jet(g: Generator, p: Point2) -> Result<KernelJet> {
    GeometryModel::HyperbolicHalfPlane.check_point(p)?;
    let Point2 { x, y } = p;
    let (y2, y3) = (y * y, y * y * y);
    let jet = match g {
        Generator::Dilation => KernelJet {
            value: x / y,
            grad: Covector([1.0 / y, -x / y2]),
            hessian: Sym2::new(0.0, -1.0 / y2, 2.0 * x / y3),
        },
        Generator::Translation => KernelJet {
            value: 1.0 / y,
            grad: Covector([0.0, -1.0 / y2]),
            hessian: Sym2::new(0.0, 0.0, 2.0 / y3),
        },
        Generator::Special => KernelJet {
            value: (x * x + y * y) / y,
            grad: Covector([2.0 * x / y, 1.0 - x * x / y2]),
            hessian: Sym2::new(2.0 / y, -2.0 * x / y2, 2.0 * x * x / y3),
        },
    };
    Ok(jet)
}

/// `sharp(*dk)` for the kernel function paired with `g`.
pub fn hamiltonian_vector(g: Generator, p: Point2) -> Result<Tangent> {
    let dk = kernel_grad(g, p)?;
    GeometryModel::HyperbolicHalfPlane.sharp(hodge_star(dk), p)
}

/// Lie derivative of the metric along a vector field with Jacobian `jac`:
/// `(L_ω g)_ij = ω^k ∂_k g_ij + g_kj ∂_i ω^k + g_ik ∂_j ω^k`.
///
/// Zero exactly when the field is Killing.
pub fn metric_lie_derivative(
    model: GeometryModel,
    p: Point2,
    field: Tangent,
    jac: [[f64; 2]; 2],
) -> Result<Sym2> {
    let phi = model.conformal_factor(p)?;
    // g = φ δ, ∂_y φ = −2/y³ in the hyperbolic model
    let dphi = match model {
        GeometryModel::Flat => [0.0, 0.0],
        GeometryModel::HyperbolicHalfPlane => [0.0, -2.0 / (p.y * p.y * p.y)],
    };
    let transport = field.0[0] * dphi[0] + field.0[1] * dphi[1];
    let entry = |i: usize, j: usize| {
        let delta = if i == j { 1.0 } else { 0.0 };
        transport * delta + phi * (jac[j][i] + jac[i][j])
    };
    Ok(Sym2::new(entry(0, 0), entry(0, 1), entry(1, 1)))
}

/// Deck transformation `(x, y) ↦ (λx, λy)` of the hyperbolic cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dilation {
    lambda: f64,
}

impl Dilation {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "deck dilation factor must exceed 1, got {lambda}"
            )));
        }
        Ok(Dilation { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        self.lambda * p
    }

    /// `γ^k` for any integer `k`.
    pub fn apply_power(&self, p: Point2, k: i32) -> Point2 {
        self.lambda.powi(k) * p
    }

    /// `(γ* f)(p) = f(γ p)`.
    pub fn pullback_scalar(&self, f: impl Fn(Point2) -> f64, p: Point2) -> f64 {
        f(self.apply(p))
    }

    /// `(γ* S)(p) = Jᵀ S(γ p) J` with `J = λ Id`.
    pub fn pullback_tensor(&self, s: impl Fn(Point2) -> Sym2, p: Point2) -> Sym2 {
        s(self.apply(p)).scale(self.lambda * self.lambda)
    }
}

/// A cyclic group of deck transformations acting on chart points.
pub trait DeckAction {
    fn act(&self, p: Point2, power: i32) -> Point2;
}

impl DeckAction for Dilation {
    fn act(&self, p: Point2, power: i32) -> Point2 {
        self.apply_power(p, power)
    }
}

/// Lattice translation of a flat torus, `p ↦ p + power · shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub shift: Point2,
}

impl DeckAction for Translation {
    fn act(&self, p: Point2, power: i32) -> Point2 {
        p + (power as f64) * self.shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HYP: GeometryModel = GeometryModel::HyperbolicHalfPlane;

    fn sample_points() -> Vec<Point2> {
        let mut pts = Vec::new();
        for i in 0..21 {
            for j in 0..21 {
                pts.push(Point2::new(-2.0 + 0.2 * i as f64, 0.5 + 0.175 * j as f64));
            }
        }
        pts
    }

    #[test]
    fn metric_examples() {
        assert_eq!(
            GeometryModel::Flat.metric_at(Point2::new(3.0, -7.0)).unwrap(),
            Sym2::diag(1.0, 1.0)
        );
        assert_eq!(
            HYP.metric_at(Point2::new(0.0, 2.0)).unwrap(),
            Sym2::diag(0.25, 0.25)
        );
        assert_eq!(HYP.metric_at(Point2::new(5.0, 1.0)).unwrap(), Sym2::diag(1.0, 1.0));
        assert!(matches!(
            HYP.metric_at(Point2::new(0.0, 0.0)),
            Err(Error::DomainViolation { .. })
        ));
        assert!(HYP.metric_at(Point2::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn christoffel_examples() {
        let flat = GeometryModel::Flat.christoffel_at(Point2::new(1.0, -3.0)).unwrap();
        assert!(flat.iter().flatten().flatten().all(|&c| c == 0.0));
        let c = HYP.christoffel_at(Point2::new(0.0, 1.0)).unwrap();
        assert_eq!(c[1][0][0], 1.0);
        let c = HYP.christoffel_at(Point2::new(0.0, 2.0)).unwrap();
        assert_eq!(c[0][0][1], -0.5);
        assert_eq!(c[0][1][0], -0.5);
        assert_eq!(c[1][1][1], -0.5);
        assert_eq!(c[1][0][0], 0.5);
        assert_eq!(c[0][0][0], 0.0);
        assert_eq!(c[1][0][1], 0.0);
        assert_eq!(c[0][1][1], 0.0);
    }

    /// Levi-Civita formula Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    /// with metric derivatives by central differences.
    #[test]
    fn christoffel_matches_levi_civita_formula() {
        let d = 1e-5;
        for p in sample_points() {
            let g = |q: Point2| HYP.metric_at(q).unwrap();
            let dg = |l: usize| {
                let e = if l == 0 { Point2::new(d, 0.0) } else { Point2::new(0.0, d) };
                let (gp, gm) = (g(p + e), g(p - e));
                [[(gp.get(0, 0) - gm.get(0, 0)) / (2.0 * d), (gp.get(0, 1) - gm.get(0, 1)) / (2.0 * d)],
                 [(gp.get(1, 0) - gm.get(1, 0)) / (2.0 * d), (gp.get(1, 1) - gm.get(1, 1)) / (2.0 * d)]]
            };
            let dgs = [dg(0), dg(1)];
            let ginv = HYP.inverse_metric_at(p).unwrap();
            let c = HYP.christoffel_at(p).unwrap();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = 0.0;
                        for l in 0..2 {
                            v += 0.5 * ginv.get(k, l) * (dgs[i][j][l] + dgs[j][i][l] - dgs[l][i][j]);
                        }
                        assert!((v - c[k][i][j]).abs() < 1e-6 * (1.0 + v.abs()), "{p:?} {k}{i}{j}");
                        assert_eq!(c[k][i][j], c[k][j][i]);
                    }
                }
            }
        }
    }

    #[test]
    fn star_examples_and_square() {
        assert_eq!(hodge_star(Covector([1.0, 0.0])), Covector([0.0, -1.0]));
        assert_eq!(hodge_star(Covector([0.0, 1.0])), Covector([1.0, 0.0]));
        assert_eq!(hodge_star(Covector([3.0, 4.0])), Covector([4.0, -3.0]));
        let a = Covector([0.3, -1.7]);
        assert_eq!(hodge_star(hodge_star(a)), Covector([-0.3, 1.7]));
    }

    #[test]
    fn sharp_examples() {
        let p = Point2::new(0.4, -2.0);
        assert_eq!(
            GeometryModel::Flat.sharp(Covector([2.0, 5.0]), p).unwrap(),
            Tangent([2.0, 5.0])
        );
        assert_eq!(
            HYP.sharp(Covector([-1.0, -1.0]), Point2::new(1.0, 1.0)).unwrap(),
            Tangent([-1.0, -1.0])
        );
        assert_eq!(
            HYP.sharp(Covector([1.0, 0.0]), Point2::new(0.0, 2.0)).unwrap(),
            Tangent([4.0, 0.0])
        );
    }

    #[test]
    fn killing_examples() {
        assert_eq!(killing_eval(Generator::Dilation, Point2::new(1.0, 1.0)), Tangent([1.0, 1.0]));
        assert_eq!(killing_eval(Generator::Translation, Point2::new(17.0, -3.0)), Tangent([1.0, 0.0]));
        assert_eq!(killing_eval(Generator::Special, Point2::new(1.0, 1.0)), Tangent([0.0, 2.0]));
    }

    #[test]
    fn generators_satisfy_killing_equation() {
        for p in sample_points() {
            for g in Generator::ALL {
                let l = metric_lie_derivative(HYP, p, killing_eval(g, p), killing_jacobian(g, p)).unwrap();
                assert!(l.norm_inf() < 1e-12 * (1.0 + p.x.abs() + p.y.abs()).powi(2), "{g:?} {p:?}");
            }
        }
        // ∂_y is not an isometry of the half-plane metric
        let l = metric_lie_derivative(HYP, Point2::new(0.0, 1.0), Tangent([0.0, 1.0]), [[0.0; 2]; 2]).unwrap();
        assert_eq!(l, Sym2::diag(-2.0, -2.0));
    }

    #[test]
    fn killing_jacobian_matches_differences() {
        let d = 1e-6;
        for p in sample_points().into_iter().step_by(17) {
            for g in Generator::ALL {
                let jac = killing_jacobian(g, p);
                for j in 0..2 {
                    let e = if j == 0 { Point2::new(d, 0.0) } else { Point2::new(0.0, d) };
                    let (a, b) = (killing_eval(g, p + e), killing_eval(g, p - e));
                    for i in 0..2 {
                        assert!(((a.0[i] - b.0[i]) / (2.0 * d) - jac[i][j]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(Generator::Dilation, Point2::new(2.0, 1.0)).unwrap(), 2.0);
        assert_eq!(kernel_eval(Generator::Translation, Point2::new(0.0, 4.0)).unwrap(), 0.25);
        assert_eq!(kernel_eval(Generator::Special, Point2::new(1.0, 2.0)).unwrap(), 2.5);
        assert!(kernel_eval(Generator::Special, Point2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn kernel_derivatives_match_differences() {
        let d = 1e-5;
        for p in sample_points().into_iter().step_by(7) {
            for g in Generator::ALL {
                let jet = kernel_jet(g, p).unwrap();
                let ex = Point2::new(d, 0.0);
                let ey = Point2::new(0.0, d);
                let f = |q| kernel_eval(g, q).unwrap();
                let gx = (f(p + ex) - f(p - ex)) / (2.0 * d);
                let gy = (f(p + ey) - f(p - ey)) / (2.0 * d);
                assert!((gx - jet.grad.0[0]).abs() < 1e-6 * (1.0 + gx.abs()));
                assert!((gy - jet.grad.0[1]).abs() < 1e-6 * (1.0 + gy.abs()));
                let df = |q| kernel_grad(g, q).unwrap();
                let hxx = (df(p + ex).0[0] - df(p - ex).0[0]) / (2.0 * d);
                let hxy = (df(p + ey).0[0] - df(p - ey).0[0]) / (2.0 * d);
                let hyy = (df(p + ey).0[1] - df(p - ey).0[1]) / (2.0 * d);
                assert!((hxx - jet.hessian.s11).abs() < 1e-5 * (1.0 + hxx.abs()));
                assert!((hxy - jet.hessian.s12).abs() < 1e-5 * (1.0 + hxy.abs()));
                assert!((hyy - jet.hessian.s22).abs() < 1e-5 * (1.0 + hyy.abs()));
            }
        }
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(
            hamiltonian_vector(Generator::Dilation, Point2::new(1.0, 1.0)).unwrap(),
            Tangent([-1.0, -1.0])
        );
        assert_eq!(
            hamiltonian_vector(Generator::Translation, Point2::new(0.0, 2.0)).unwrap(),
            Tangent([-1.0, 0.0])
        );
        assert_eq!(
            hamiltonian_vector(Generator::Special, Point2::new(1.0, 1.0)).unwrap(),
            Tangent([0.0, -2.0])
        );
    }

    #[test]
    fn hamiltonian_is_minus_killing_everywhere() {
        for p in sample_points() {
            for g in Generator::ALL {
                let w = killing_eval(g, p);
                let h = hamiltonian_vector(g, p).unwrap();
                assert!((h + w).norm_inf() <= 1e-12 * w.norm_inf().max(1.0), "{g:?} {p:?}");
            }
        }
    }

    #[test]
    fn deck_transform_examples() {
        let gamma = Dilation::new(2.0).unwrap();
        assert_eq!(gamma.apply(Point2::new(1.0, 1.0)), Point2::new(2.0, 2.0));
        assert!(Dilation::new(1.0).is_err());
        assert!(Dilation::new(0.5).is_err());
        for p in sample_points().into_iter().step_by(11) {
            let k0 = |q| kernel_eval(Generator::Dilation, q).unwrap();
            let k1 = |q| kernel_eval(Generator::Translation, q).unwrap();
            assert!((gamma.pullback_scalar(k0, p) - k0(p)).abs() < 1e-14 * (1.0 + k0(p).abs()));
            assert!((gamma.pullback_scalar(k1, p) - k1(p) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn deck_transform_is_isometry() {
        for lambda in [1.5, 2.0, 3.7] {
            let gamma = Dilation::new(lambda).unwrap();
            for p in sample_points() {
                let pulled = gamma.pullback_tensor(|q| HYP.metric_at(q).unwrap(), p);
                let g = HYP.metric_at(p).unwrap();
                assert!((pulled - g).norm_inf() <= 1e-14 * g.norm_inf());
            }
        }
    }

    #[test]
    fn metric_is_positive_definite() {
        for p in sample_points() {
            for m in [GeometryModel::Flat, HYP] {
                let g = m.metric_at(p).unwrap();
                assert!(g.s11 > 0.0 && g.s11 * g.s22 - g.s12 * g.s12 > 0.0);
            }
        }
    }
}
