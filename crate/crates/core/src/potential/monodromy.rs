use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DeckAction, Dilation, GeometryModel, Point2, Translation};
use crate::grid::{Grid2, ScalarField, SymTensorField};
use crate::potential::kernel::{fit_basis, Basis, KernelProjection};
use crate::potential::reconstruct::{reconstruct_flat, reconstruct_hyperbolic, ReconstructionOptions, ReconstructionResult};

/// Sector `r_min ≤ r < λ r_min`, `|θ − π/2| ≤ half_angle` of the half-plane:
/// a piece of the fundamental annulus of the cylinder `H²/⟨γ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorDomain {
    pub r_min: f64,
    pub half_angle: f64,
}

impl SectorDomain {
    pub fn contains(&self, p: Point2, lambda: f64) -> bool {
        let r = p.norm();
        let off = (p.x.atan2(p.y)).abs();
        r >= self.r_min && r < lambda * self.r_min && off <= self.half_angle
    }

    /// Grid nodes inside the sector.
    pub fn samples(&self, grid: &Grid2, lambda: f64) -> Vec<Point2> {
        grid.nodes().map(|(i, j)| grid.point(i, j)).filter(|&p| self.contains(p, lambda)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonodromyResult {
    pub lambda: f64,
    pub power: i32,
    /// Coefficients of `ν(γ^power)` in the basis `{k₀, k₁, k₂}`.
    pub coefficients: [f64; 3],
    pub residual: f64,
    pub condition: f64,
    pub samples: usize,
    pub invariance_mismatch: f64,
    pub reconstruction: ReconstructionResult,
}

/// `sup |ψ_γ^*S*(X) − S*(X)|` over samples whose image stays in the grid.
pub fn invariance_mismatch(s: &SymTensorField, gamma: &Dilation, samples: &[Point2]) -> Result<f64> {
    let l2 = gamma.lambda() * gamma.lambda();
    let mut worst = 0.0f64;
    for &x in samples {
        let gx = gamma.apply(x);
        if !s.grid.contains(gx) {
            continue;
        }
        worst = worst.max((s.interpolate(gx)?.scale(l2) - s.interpolate(x)?).norm_inf());
    }
    Ok(worst)
}

fn differences(e: &ScalarField, action: &dyn DeckAction, samples: &[Point2], power: i32) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|&x| {
            let gx = action.act(x, power);
            if !e.grid.contains(gx) {
                return Err(Error::StripTooSmall(format!(
                    "image ({:.4}, {:.4}) of sample ({:.4}, {:.4}) under power {power} is outside the grid",
                    gx.x, gx.y, x.x, x.y
                )));
            }
            Ok(e.interpolate(gx)? - e.interpolate(x)?)
        })
        .collect()
}

/// Project `Ẽ(γ^power X) − Ẽ(X)` over the samples onto `basis`.
pub fn monodromy_of(
    e: &ScalarField,
    action: &dyn DeckAction,
    basis: Basis,
    samples: &[Point2],
    power: i32,
) -> Result<KernelProjection> {
    let d = differences(e, action, samples, power)?;
    if power == 0 {
        return Ok(KernelProjection { coefficients: [0.0; 3], residual: 0.0, condition: 1.0 });
    }
    fit_basis(basis, samples, &d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonodromyOptions {
    /// Largest allowed `sup|ψ^*S* − S*| / sup|S*|` over the samples.
    pub invariance_tolerance: f64,
    pub reconstruction: ReconstructionOptions,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        MonodromyOptions { invariance_tolerance: 1e-2, reconstruction: ReconstructionOptions::default() }
    }
}

/// Reconstruct `Ẽ` on a strip of the half-plane from a dilation-invariant
/// `S*` and compute `ν(γ^power)`.
pub fn monodromy(
    sstar: &SymTensorField,
    lambda: f64,
    power: i32,
    sector: &SectorDomain,
    opts: &MonodromyOptions,
) -> Result<MonodromyResult> {
    if sstar.grid.model != GeometryModel::HyperbolicHalfPlane {
        return Err(Error::InvalidParameter("monodromy of the cylinder needs a half-plane grid".into()));
    }
    let gamma = Dilation::new(lambda)?;
    let samples = sector.samples(&sstar.grid, lambda);
    if samples.len() < 3 {
        return Err(Error::StripTooSmall(format!("only {} grid nodes in the base sector", samples.len())));
    }
    let scale = samples.iter().map(|&p| sstar.interpolate(p).map(|s| s.norm_inf())).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
    let mismatch = invariance_mismatch(sstar, &gamma, &samples)?;
    let threshold = opts.invariance_tolerance * scale;
    if mismatch > threshold {
        return Err(Error::InvarianceViolation { mismatch, threshold });
    }
    let reconstruction = reconstruct_hyperbolic(sstar, &opts.reconstruction)?;
    let proj = monodromy_of(&reconstruction.potential, &gamma, Basis::HyperbolicKernel, &samples, power)?;
    Ok(MonodromyResult {
        lambda,
        power,
        coefficients: proj.coefficients,
        residual: proj.residual,
        condition: proj.condition,
        samples: samples.len(),
        invariance_mismatch: mismatch,
        reconstruction,
    })
}

/// Grid nodes whose images under every listed power of `action` stay inside
/// the grid.
pub fn reachable_nodes(grid: &Grid2, action: &dyn DeckAction, powers: &[i32]) -> Vec<Point2> {
    grid.nodes()
        .map(|(i, j)| grid.point(i, j))
        .filter(|&p| powers.iter().all(|&k| grid.contains(action.act(p, k))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CocycleReport {
    pub m: i32,
    pub n: i32,
    /// `sup |[Ẽ(γ^{m+n}X) − Ẽ(X)] − [Ẽ(γ^m γ^n X) − Ẽ(γ^n X)] − [Ẽ(γ^n X) − Ẽ(X)]|`.
    pub telescoping_error: f64,
    pub nu_m: [f64; 3],
    pub nu_n: [f64; 3],
    pub nu_sum: [f64; 3],
    /// `max_α |ν(γ^{m+n}) − ν(γ^m) − ν(γ^n)|`: plain additivity, reported only.
    pub additivity_gap: f64,
}

/// Telescoping cocycle identity and (observationally) plain additivity.
pub fn cocycle_check(
    e: &ScalarField,
    action: &dyn DeckAction,
    basis: Basis,
    samples: &[Point2],
    m: i32,
    n: i32,
) -> Result<CocycleReport> {
    let mut worst = 0.0f64;
    for &x in samples {
        let gn = action.act(x, n);
        let gmn = action.act(gn, m);
        let direct = action.act(x, m + n);
        for q in [gn, gmn, direct] {
            if !e.grid.contains(q) {
                return Err(Error::StripTooSmall(format!("deck image ({:.4}, {:.4}) is outside the grid", q.x, q.y)));
            }
        }
        let lhs = e.interpolate(direct)? - e.interpolate(x)?;
        let rhs = (e.interpolate(gmn)? - e.interpolate(gn)?) + (e.interpolate(gn)? - e.interpolate(x)?);
        worst = worst.max((lhs - rhs).abs());
    }
    let nu_m = monodromy_of(e, action, basis, samples, m)?.coefficients;
    let nu_n = monodromy_of(e, action, basis, samples, n)?.coefficients;
    let nu_sum = monodromy_of(e, action, basis, samples, m + n)?.coefficients;
    let additivity_gap = (0..3).map(|k| (nu_sum[k] - nu_m[k] - nu_n[k]).abs()).fold(0.0, f64::max);
    Ok(CocycleReport { m, n, telescoping_error: worst, nu_m, nu_n, nu_sum, additivity_gap })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusResult {
    pub periods: [f64; 2],
    /// Affine monodromy `(a_x, a_y, c)` of `E(X + L_k e_k) − E(X)` per generator.
    pub monodromy: [[f64; 3]; 2],
    pub fit_residual: [f64; 2],
    pub periodicity_mismatch: f64,
    pub reconstruction: ReconstructionResult,
}

/// Base cell `[x₀, x₀ + L₁) × [y₀, y₀ + L₂)` of a lift grid, as node positions.
pub fn torus_base_samples(grid: &Grid2, periods: [f64; 2]) -> Vec<Point2> {
    let tol = 1e-9 * grid.h_max();
    grid.nodes()
        .map(|(i, j)| grid.point(i, j))
        .filter(|p| p.x - grid.x0 < periods[0] - tol && p.y - grid.y0 < periods[1] - tol)
        .collect()
}

/// Reconstruct on a lift covering several periods and read off the affine
/// monodromy of each lattice generator.
pub fn reconstruct_flat_torus(
    sstar: &SymTensorField,
    periods: [f64; 2],
    opts: &ReconstructionOptions,
) -> Result<TorusResult> {
    let g = sstar.grid;
    if g.model != GeometryModel::Flat {
        return Err(Error::InvalidParameter("torus reconstruction needs a flat grid".into()));
    }
    let steps = [periods[0] / g.hx, periods[1] / g.hy];
    if steps.iter().any(|s| (s - s.round()).abs() > 1e-6) {
        return Err(Error::InvalidParameter("periods must be whole multiples of the grid spacing".into()));
    }
    let (sx, sy) = (steps[0].round() as usize, steps[1].round() as usize);
    if g.nx < 2 * sx + 1 || g.ny < 2 * sy + 1 {
        return Err(Error::StripTooSmall("the lift must cover at least two periods in each direction".into()));
    }
    // periodicity of S* away from the boundary stencils
    let mut mismatch = 0.0f64;
    for i in 1..g.nx - 1 {
        for j in 1..g.ny - 1 {
            if i + sx < g.nx - 1 {
                mismatch = mismatch.max((sstar.at(i + sx, j) - sstar.at(i, j)).norm_inf());
            }
            if j + sy < g.ny - 1 {
                mismatch = mismatch.max((sstar.at(i, j + sy) - sstar.at(i, j)).norm_inf());
            }
        }
    }
    let threshold = 1e-8 * sstar.sup_norm().max(1.0);
    if mismatch > threshold {
        return Err(Error::InvarianceViolation { mismatch, threshold });
    }
    // periodic data varies on the scale L/2π rather than on the unit scale
    let mut opts = *opts;
    if opts.integrability_threshold.is_none() {
        let len = periods[0].min(periods[1]) / std::f64::consts::TAU;
        opts.integrability_threshold = Some(10.0 * g.h_max().powi(2) * sstar.sup_norm() / len.powi(3));
    }
    let reconstruction = reconstruct_flat(sstar, &opts)?;
    let samples = torus_base_samples(&g, periods);
    let mut monodromy = [[0.0; 3]; 2];
    let mut fit_residual = [0.0; 2];
    for (k, shift) in [Point2::new(periods[0], 0.0), Point2::new(0.0, periods[1])].into_iter().enumerate() {
        let proj = monodromy_of(&reconstruction.potential, &Translation { shift }, Basis::Affine, &samples, 1)?;
        monodromy[k] = proj.coefficients;
        fit_residual[k] = proj.residual;
    }
    Ok(TorusResult { periods, monodromy, fit_residual, periodicity_mismatch: mismatch, reconstruction })
}
