//! Conserved quantities built from solutions: the rotation current, the 1D
//! energy, the stress tensor and its dual, and Killing-field currents.

use ndarray::Array2;
use serde::Serialize;

use crate::calculus::{closedness_residual_on, diff_x, diff_y, grad_fd, hessian_fd, loop_integral, circle_path};
use crate::error::{Error, Result};
use crate::geometry::{hodge_star, killing_eval, Covector, Generator, GeometryModel, Point2, Sym2};
use crate::grid::{OneFormField, Region, ScalarField, SymTensorField};
use crate::jet::Jet2;
use crate::variational::{Lagrangian1D, PDirichletSpec};

fn check_model(spec: &PDirichletSpec, u: &ScalarField) -> Result<()> {
    if spec.model != u.grid.model {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `θ = *(w |du|_ε^{p−2} du)`, evaluated nodewise from finite-difference gradients.
pub fn rotation_current(spec: &PDirichletSpec, u: &ScalarField) -> Result<OneFormField> {
    check_model(spec, u)?;
    Ok(grad_fd(u).map(|p, du| hodge_star(spec.flux(p.y, du))))
}

/// Loop integrals of `a` around grid polygons approximating circles of the
/// given radii about `center`.
pub fn flux_constancy(a: &OneFormField, center: Point2, radii: &[f64], vertices: usize) -> Result<Vec<f64>> {
    radii
        .iter()
        .map(|&r| loop_integral(a, &circle_path(&a.grid, center, r, vertices)?))
        .collect()
}

/// A set of labelled one-forms on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentSet {
    pub labels: Vec<String>,
    pub fields: Vec<OneFormField>,
}

impl CurrentSet {
    pub fn new(entries: Vec<(String, OneFormField)>) -> Result<Self> {
        if let Some((_, first)) = entries.first() {
            if entries.iter().any(|(_, f)| f.grid != first.grid) {
                return Err(Error::GridMismatch);
            }
        }
        let (labels, fields) = entries.into_iter().unzip();
        Ok(CurrentSet { labels, fields })
    }

    pub fn get(&self, label: &str) -> Option<&OneFormField> {
        self.labels.iter().position(|l| l == label).map(|k| &self.fields[k])
    }

    /// Closedness residual of each current over cells inside `region`.
    pub fn closedness_on(&self, region: &Region) -> Vec<(String, f64)> {
        self.labels.iter().cloned().zip(self.fields.iter().map(|f| closedness_residual_on(f, region))).collect()
    }
}

/// `E(u) = L_{y'}(u, u') u' − L(u, u')` along a sampled trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub h: f64,
    pub values: Vec<f64>,
}

impl EnergyTrace {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `(max − min) / |mean|`.
    pub fn relative_drift(&self) -> f64 {
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        (hi - lo) / self.mean().abs()
    }
}

/// Energy at interior trajectory nodes, with `u'` by central differences.
pub fn energy_1d(lag: &Lagrangian1D, traj: &[f64], h: f64) -> Result<EnergyTrace> {
    if traj.len() < 3 {
        return Err(Error::GridTooSmall { nx: traj.len(), ny: 1, min: 3 });
    }
    let values: Vec<f64> = traj
        .windows(3)
        .map(|w| {
            let (u, v) = (w[1], (w[2] - w[0]) / (2.0 * h));
            lag.dv(u, v) * v - lag.eval(u, v)
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    Ok(EnergyTrace { h, values })
}

/// Stress tensor `S = |du|^{p−2} du⊗du − (1/p)|du|^p g` at one point, with
/// norms taken in the metric `g` of `model` and `ε` added to `|du|²` before
/// rescaling.
pub fn stress_at(spec: &PDirichletSpec, p: Point2, du: Covector) -> Sym2 {
    let [a, b] = du.0;
    let phi = spec.model.conformal_factor_unchecked(p);
    // |du|_g² = g^{ij} a_i a_j = (a² + b²) / φ
    let q = (a * a + b * b + spec.epsilon * spec.epsilon) / phi;
    let c = q.powf(0.5 * spec.p - 1.0);
    let iso = q.powf(0.5 * spec.p) / spec.p * phi;
    Sym2::new(c * a * a - iso, c * a * b, c * b * b - iso)
}

pub fn stress_tensor(spec: &PDirichletSpec, u: &ScalarField) -> Result<SymTensorField> {
    check_model(spec, u)?;
    let du = grad_fd(u);
    let mut s = SymTensorField::zeros(u.grid);
    for (i, j) in u.grid.nodes() {
        s.set(i, j, stress_at(spec, u.grid.point(i, j), du.at(i, j)));
    }
    Ok(s)
}

/// Index-wise Hodge dual in two dimensions: swaps the diagonal and negates
/// the off-diagonal entry. An involution preserving the trace.
pub fn dual(s: Sym2) -> Sym2 {
    Sym2::new(s.s22, -s.s12, s.s11)
}

pub fn dual_tensor(s: &SymTensorField) -> SymTensorField {
    SymTensorField { grid: s.grid, s11: s.s22.clone(), s12: s.s12.mapv(|v| -v), s22: s.s11.clone() }
}

/// `*(S, ω_α)` for the three Killing fields of the half-plane.
pub fn killing_currents(s: &SymTensorField) -> Result<CurrentSet> {
    if s.grid.model != GeometryModel::HyperbolicHalfPlane {
        return Err(Error::Unsupported(
            "Killing currents are defined on the half-plane; use the rows of S on the flat model".into(),
        ));
    }
    let entries = Generator::ALL
        .iter()
        .map(|&gen| {
            let mut f = OneFormField::zeros(s.grid);
            for (i, j) in s.grid.nodes() {
                let w = killing_eval(gen, s.grid.point(i, j));
                f.set(i, j, hodge_star(s.at(i, j).contract(w)));
            }
            (gen.label().to_string(), f)
        })
        .collect();
    CurrentSet::new(entries)
}

/// Fraction of nodes of `region` at which the contractions `(S, ω_α)` span
/// a plane (numerical rank 2). Three vectors in a plane are always
/// pointwise dependent; this records whether they are generically of full
/// rank.
pub fn killing_contraction_rank(s: &SymTensorField, region: &Region) -> Result<RankSummary> {
    if s.grid.model != GeometryModel::HyperbolicHalfPlane {
        return Err(Error::Unsupported("rank of Killing contractions needs the half-plane".into()));
    }
    let mut counts = [0usize; 3];
    for (i, j) in region.nodes() {
        let p = s.grid.point(i, j);
        let t = s.at(i, j);
        let v: Vec<Covector> = Generator::ALL.iter().map(|&g| t.contract(killing_eval(g, p))).collect();
        let scale = v.iter().map(|c| c.0[0].abs().max(c.0[1].abs())).fold(0.0, f64::max);
        let rank = if scale == 0.0 {
            0
        } else {
            let minor = |a: Covector, b: Covector| (a.0[0] * b.0[1] - a.0[1] * b.0[0]).abs();
            let m = minor(v[0], v[1]).max(minor(v[0], v[2])).max(minor(v[1], v[2]));
            if m > 1e-10 * scale * scale { 2 } else { 1 }
        };
        counts[rank] += 1;
    }
    Ok(RankSummary { rank0: counts[0], rank1: counts[1], rank2: counts[2] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankSummary {
    pub rank0: usize,
    pub rank1: usize,
    pub rank2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentumReport {
    /// Sup-norms of `∂_i S_i1` and `∂_i S_i2`.
    pub row_divergence: [f64; 2],
    /// Nodewise mismatch of the discrete identity
    /// `(|du|^{p−2}du, d∂_j u) = (1/p) ∂_j |du|^p` (a truncation error).
    pub discrete_identity: f64,
}

/// Row divergences of the flat stress tensor, which vanish at solutions.
pub fn translation_momentum_check(spec: &PDirichletSpec, u: &ScalarField, region: &Region) -> Result<MomentumReport> {
    check_model(spec, u)?;
    if u.grid.model.is_hyperbolic() {
        return Err(Error::Unsupported(
            "translation momenta are flat-model quantities; use Killing currents on the half-plane".into(),
        ));
    }
    let g = u.grid;
    let s = stress_tensor(spec, u)?;
    let div1 = diff_x(&g, &s.s11) + diff_y(&g, &s.s12);
    let div2 = diff_x(&g, &s.s12) + diff_y(&g, &s.s22);

    let du = grad_fd(u);
    let hess = hessian_fd(u);
    let eps2 = spec.epsilon * spec.epsilon;
    let q = &du.a1 * &du.a1 + &du.a2 * &du.a2 + eps2;
    let qp = q.mapv(|v| v.powf(0.5 * spec.p) / spec.p);
    let c = q.mapv(|v| v.powf(0.5 * spec.p - 1.0));
    let lhs1 = &c * &(&du.a1 * &hess.s11 + &du.a2 * &hess.s12);
    let lhs2 = &c * &(&du.a1 * &hess.s12 + &du.a2 * &hess.s22);
    let m1: Array2<f64> = lhs1 - diff_x(&g, &qp);
    let m2: Array2<f64> = lhs2 - diff_y(&g, &qp);
    Ok(MomentumReport {
        row_divergence: [region.sup(&div1), region.sup(&div2)],
        discrete_identity: region.sup(&m1).max(region.sup(&m2)),
    })
}

/// Largest relative mismatch, over `points`, of the pointwise identity
/// `(|du|_ε^{p−2} du, d∂_j u) = (1/p) ∂_j |du|_ε^p` for an analytic field.
///
/// The left side uses the exact Hessian carried by the jet; the right side
/// differentiates the analytic function `|du|_ε^p` with a sixth-order
/// central difference, so the two sides are computed independently.
pub fn momentum_identity_residual(spec: &PDirichletSpec, u: impl Fn(Jet2, Jet2) -> Jet2, points: &[Point2]) -> f64 {
    let jet = |p: Point2| u(Jet2::x(p), Jet2::y(p));
    let eps2 = spec.epsilon * spec.epsilon;
    let power = |p: Point2| {
        let j = jet(p);
        (j.dx * j.dx + j.dy * j.dy + eps2).powf(0.5 * spec.p) / spec.p
    };
    let mut worst = 0.0f64;
    for &p in points {
        let j = jet(p);
        let c = (j.dx * j.dx + j.dy * j.dy + eps2).powf(0.5 * spec.p - 1.0);
        let lhs = [c * (j.dx * j.dxx + j.dy * j.dxy), c * (j.dx * j.dxy + j.dy * j.dyy)];
        for (k, e) in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)].into_iter().enumerate() {
            // step on the scale over which |du| changes, |du| / |D²u|
            let curv = j.dxx.abs().max(j.dxy.abs()).max(j.dyy.abs());
            let grad = (j.dx * j.dx + j.dy * j.dy + eps2).sqrt();
            let len = if curv > 0.0 { (grad / curv).min(1.0 + p.norm()) } else { 1.0 + p.norm() };
            let d = 1e-3 * len;
            let f = |m: f64| power(p + (m * d) * e);
            let rhs = (45.0 * (f(1.0) - f(-1.0)) - 9.0 * (f(2.0) - f(-2.0)) + (f(3.0) - f(-3.0))) / (60.0 * d);
            let scale = lhs[k].abs().max(rhs.abs()).max(power(p) / (1.0 + p.norm()));
            if scale > 0.0 {
                worst = worst.max((lhs[k] - rhs).abs() / scale);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;

    fn flat(n: usize) -> Grid2 {
        Grid2::from_extents(GeometryModel::Flat, [-1.0, 1.0], [-1.0, 1.0], n, n).unwrap()
    }

    fn spec(p: f64, model: GeometryModel) -> PDirichletSpec {
        PDirichletSpec::new(p, model).unwrap()
    }

    #[test]
    fn rotation_current_examples() {
        let g = flat(9);
        let theta = rotation_current(&spec(2.0, GeometryModel::Flat), &ScalarField::from_fn(g, |p| p.x)).unwrap();
        for (i, j) in g.nodes() {
            assert!((theta.at(i, j).0[0]).abs() < 1e-12 && (theta.at(i, j).0[1] + 1.0).abs() < 1e-12);
        }
        let theta = rotation_current(&spec(3.0, GeometryModel::Flat), &ScalarField::from_fn(g, |_| 2.0)).unwrap();
        assert!(theta.a1.iter().chain(theta.a2.iter()).all(|v| v.abs() < 1e-12));
        let h = Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [0.0, 1.0], [1.0, 2.0], 4, 4).unwrap();
        assert!(rotation_current(&spec(2.0, GeometryModel::Flat), &ScalarField::zeros(h)).is_err());
    }

    #[test]
    fn log_radius_current_is_the_angular_form() {
        let spec = spec(2.0, GeometryModel::Flat);
        let err = |n: usize| {
            let g = Grid2::from_extents(GeometryModel::Flat, [0.5, 1.5], [0.5, 1.5], n, n).unwrap();
            let u = ScalarField::from_fn(g, |p| p.norm().ln());
            let theta = rotation_current(&spec, &u).unwrap();
            let region = Region::interior(&g, 1);
            // *d log r = (−y dx + x dy)/r² with *(a1, a2) = (a2, −a1)
            let e = region
                .nodes()
                .map(|(i, j)| {
                    let p = g.point(i, j);
                    let r2 = p.x * p.x + p.y * p.y;
                    let t = theta.at(i, j);
                    (t.0[0] - p.y / r2).abs().max((t.0[1] + p.x / r2).abs())
                })
                .fold(0.0, f64::max);
            (e, closedness_residual_on(&theta, &region))
        };
        let (e1, c1) = err(41);
        let (e2, c2) = err(81);
        assert!((e1 / e2).log2() > 1.8 && (c1 / c2).log2() > 1.5, "{e1} {e2} {c1} {c2}");
    }

    #[test]
    fn exact_form_has_zero_loop_integrals() {
        let g = flat(41);
        let a = grad_fd(&ScalarField::from_fn(g, |p| p.x * p.y + p.y.sin()));
        let v = flux_constancy(&a, Point2::new(0.0, 0.0), &[0.3, 0.6, 0.9], 64).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-10), "{v:?}");
        assert!(flux_constancy(&a, Point2::new(0.0, 0.0), &[1.5], 64).is_err());
    }

    #[test]
    fn energy_trace_examples() {
        let free = Lagrangian1D::free_particle();
        let h = 0.1;
        let line: Vec<f64> = (0..20).map(|i| 1.0 + 3.0 * i as f64 * h).collect();
        let e = energy_1d(&free, &line, h).unwrap();
        assert!(e.values.iter().all(|v| (v - 4.5).abs() < 1e-12));
        let e = energy_1d(&free, &[2.0; 5], h).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        assert!(energy_1d(&free, &[1.0, 2.0], h).is_err());

        let h = 1e-3;
        let sine: Vec<f64> = (0..=1000).map(|i| (i as f64 * h).sin()).collect();
        let e = energy_1d(&Lagrangian1D::oscillator(), &sine, h).unwrap();
        assert!((e.mean() - 0.5).abs() < 1e-6);
        assert!(e.std_dev() / e.mean() < 1e-4);
    }

    #[test]
    fn stress_examples() {
        let g = flat(7);
        let u = ScalarField::from_fn(g, |p| p.x);
        let s = stress_tensor(&spec(2.0, GeometryModel::Flat), &u).unwrap().at(3, 3);
        assert!((s - Sym2::new(0.5, 0.0, -0.5)).norm_inf() < 1e-12);
        let s = stress_tensor(&spec(4.0, GeometryModel::Flat), &u).unwrap().at(3, 3);
        assert!((s - Sym2::new(0.75, 0.0, -0.25)).norm_inf() < 1e-12);
        let s = stress_tensor(&spec(3.0, GeometryModel::Flat), &ScalarField::from_fn(g, |_| 1.0)).unwrap();
        assert!(s.sup_norm() < 1e-12);
    }

    #[test]
    fn hyperbolic_stress_is_metric_covariant() {
        // At a point, S must transform like g: scaling coordinates by λ (an
        // isometry) maps S(λp) to S(p) / λ² for du pulled back accordingly.
        let sp = spec(3.0, GeometryModel::HyperbolicHalfPlane);
        let p = Point2::new(0.3, 1.2);
        let du = Covector([0.7, -0.4]);
        let lam = 2.5;
        let s1 = stress_at(&sp, p, du);
        let s2 = stress_at(&sp, lam * p, Covector([du.0[0] / lam, du.0[1] / lam]));
        assert!((s1 - s2.scale(lam * lam)).norm_inf() < 1e-12);
        // g-trace of S is (1 − 2/p)|du|_g^p in two dimensions
        let q: f64 = p.y * p.y * (0.49 + 0.16);
        let tr = p.y * p.y * s1.trace();
        assert!((tr - (1.0 - 2.0 / 3.0) * q.powf(1.5)).abs() < 1e-7);
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual(Sym2::new(0.5, 0.0, -0.5)), Sym2::new(-0.5, -0.0, 0.5));
        let s = Sym2::new(1.0, 2.0, 3.0);
        assert_eq!(dual(s), Sym2::new(3.0, -2.0, 1.0));
        assert_eq!(dual(dual(s)), s);
        assert_eq!(dual(s).trace(), s.trace());
        assert_eq!(dual(Sym2::ZERO), Sym2::new(0.0, -0.0, 0.0));
    }

    #[test]
    fn killing_currents_examples() {
        let g = Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [-1.0, 1.0], [0.5, 2.0], 9, 9).unwrap();
        let c = killing_currents(&SymTensorField::zeros(g)).unwrap();
        assert_eq!(c.labels, ["omega0", "omega1", "omega2"]);
        assert!(c.fields.iter().all(|f| f.a1.iter().chain(f.a2.iter()).all(|&v| v == 0.0)));

        let phi = |p: Point2| 1.0 + p.x * p.y;
        let s = SymTensorField::from_fn(g, |p| g.model.metric_at(p).unwrap().scale(phi(p)));
        let c = killing_currents(&s).unwrap();
        for (k, gen) in Generator::ALL.iter().enumerate() {
            for (i, j) in g.nodes() {
                let p = g.point(i, j);
                let flat_w = g.model.flat(killing_eval(*gen, p), p).unwrap();
                let expect = hodge_star(Covector([phi(p) * flat_w.0[0], phi(p) * flat_w.0[1]]));
                let got = c.fields[k].at(i, j);
                assert!((got.0[0] - expect.0[0]).abs() < 1e-12 && (got.0[1] - expect.0[1]).abs() < 1e-12);
            }
        }
        assert!(killing_currents(&SymTensorField::zeros(flat(5))).is_err());
    }

    #[test]
    fn analytic_momentum_identity_holds() {
        let points: Vec<Point2> = (0..25).map(|k| Point2::new(-1.0 + 0.08 * k as f64, 0.3 + 0.05 * k as f64)).collect();
        for p in [2.0, 3.0, 4.5] {
            let s = spec(p, GeometryModel::Flat);
            let r = momentum_identity_residual(&s, |x, y| (x * y).sin() + (x * x).scale(0.5) - y.cos(), &points);
            assert!(r < 1e-10, "p={p}: {r}");
        }
    }

    #[test]
    fn momentum_check_examples() {
        let g = flat(11);
        let sp = spec(2.0, GeometryModel::Flat);
        let r = translation_momentum_check(&sp, &ScalarField::from_fn(g, |p| p.x), &Region::interior(&g, 1)).unwrap();
        assert!(r.row_divergence[0] < 1e-12 && r.row_divergence[1] < 1e-12);
        let h = Grid2::from_extents(GeometryModel::HyperbolicHalfPlane, [0.0, 1.0], [1.0, 2.0], 4, 4).unwrap();
        let hs = spec(2.0, GeometryModel::HyperbolicHalfPlane);
        assert!(translation_momentum_check(&hs, &ScalarField::zeros(h), &Region::all(&h)).is_err());
        // harmonic u: row divergence and the discrete identity are truncation errors
        let at = |n: usize| {
            let g = flat(n);
            let u = ScalarField::from_fn(g, |p| p.x * p.x - p.y * p.y + p.x.exp() * p.y.cos());
            translation_momentum_check(&sp, &u, &Region::interior(&g, 2)).unwrap()
        };
        let (a, b) = (at(21), at(41));
        assert!(a.row_divergence[0] / b.row_divergence[0] > 3.0, "{a:?} {b:?}");
        assert!(a.discrete_identity / b.discrete_identity > 3.0, "{a:?} {b:?}");
    }
}
