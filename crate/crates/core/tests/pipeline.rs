//! Solve → stress → dual → potential chains across modules.

use noether_core::calculus::kernel_operator;
use noether_core::geometry::{GeometryModel, Point2, Translation};
use noether_core::grid::{Grid2, Region, ScalarField};
use noether_core::io::{read_scalar, write_scalar};
use noether_core::noether::{dual_tensor, flux_constancy, rotation_current, stress_tensor};
use noether_core::potential::presets::torus_bilinear;
use noether_core::potential::{
    cocycle_check, reconstruct, reconstruct_flat_torus, torus_base_samples, Basis, GaugeReport,
    ReconstructionOptions,
};
use noether_core::calculus::hessian_fd;
use noether_core::variational::{solve_dirichlet, BoundarySpec, PDirichletSpec, SolverConfig};

fn solved(model: GeometryModel, p: f64, n: usize, y: [f64; 2]) -> (PDirichletSpec, ScalarField) {
    let g = Grid2::from_extents(model, [-1.0, 1.0], y, n, n).unwrap();
    let spec = PDirichletSpec::new(p, model).unwrap();
    let bc = BoundarySpec::rectangle(g, |q| q.x + 0.3 * q.x * q.y + 0.2 * q.y * q.y);
    let (u, rep) = solve_dirichlet(&spec, &bc, &SolverConfig { tolerance: 1e-10, ..Default::default() }).unwrap();
    assert!(rep.converged, "{rep:?}");
    (spec, u)
}

#[test]
fn flat_p3_stress_dual_has_a_potential() {
    let residual = |n| {
        let (spec, u) = solved(GeometryModel::Flat, 3.0, n, [-1.0, 1.0]);
        let sd = dual_tensor(&stress_tensor(&spec, &u).unwrap());
        let opts = ReconstructionOptions { integrability_threshold: Some(f64::INFINITY), ..Default::default() };
        let r = reconstruct(&sd, &opts).unwrap();
        assert!(matches!(r.gauge, GaugeReport::PinBasePoint { .. }));
        // the least-squares misfit reflects how far the discrete S* is from closed
        let inner = Region::interior(&u.grid, 2);
        let op = kernel_operator(&r.potential).unwrap();
        inner.nodes().map(|(i, j)| (op.at(i, j) - sd.at(i, j)).norm_inf()).fold(0.0, f64::max)
    };
    let (a, b) = (residual(17), residual(33));
    assert!(b < a && a < 0.2, "{a} {b}");
}

#[test]
fn hyperbolic_stress_dual_is_solvable_to_truncation_error() {
    let misfit = |n| {
        let (spec, u) = solved(GeometryModel::HyperbolicHalfPlane, 2.0, n, [1.0, 3.0]);
        let sd = dual_tensor(&stress_tensor(&spec, &u).unwrap());
        let opts = ReconstructionOptions { integrability_threshold: Some(f64::INFINITY), ..Default::default() };
        let r = reconstruct(&sd, &opts).unwrap();
        assert!(matches!(r.gauge, GaugeReport::KernelOrthogonal { .. }));
        r.residual / sd.sup_norm()
    };
    let (a, b) = (misfit(17), misfit(33));
    assert!(b < a, "{a} {b}");
}

#[test]
fn csv_round_trip_preserves_currents() {
    let (spec, u) = solved(GeometryModel::Flat, 2.0, 21, [-1.0, 1.0]);
    let mut buf = Vec::new();
    write_scalar(&mut buf, &u).unwrap();
    let back = read_scalar(buf.as_slice(), GeometryModel::Flat).unwrap();
    assert_eq!(back.grid, u.grid);
    let a = rotation_current(&spec, &u).unwrap();
    let b = rotation_current(&spec, &back).unwrap();
    let (fa, fb) = (
        flux_constancy(&a, Point2::new(0.0, 0.0), &[0.5], 128).unwrap(),
        flux_constancy(&b, Point2::new(0.0, 0.0), &[0.5], 128).unwrap(),
    );
    assert!((fa[0] - fb[0]).abs() < 1e-12);
    // u is regular inside the circle, so the flux vanishes up to truncation
    assert!(fa[0].abs() < 1e-2, "{fa:?}");
}

#[test]
fn torus_bilinear_monodromy() {
    let beta = -0.8;
    let h = 1.0 / 16.0;
    let lift = Grid2::new(GeometryModel::Flat, Point2::new(0.0, 0.0), h, h, 49, 33).unwrap();
    let e = ScalarField::from_fn(lift, torus_bilinear(beta, [1.0, 1.0]));
    let r = reconstruct_flat_torus(&hessian_fd(&e), [1.0, 1.0], &Default::default()).unwrap();
    // E(x + 1, y) − E(x, y) = βy
    let [ax, ay, _] = r.monodromy[0];
    assert!(ax.abs() < 1e-6 && (ay - beta).abs() < 1e-6, "{:?}", r.monodromy);
    // E(x, y + 1) − E(x, y) = βx
    let [bx, by, _] = r.monodromy[1];
    assert!((bx - beta).abs() < 1e-6 && by.abs() < 1e-6, "{:?}", r.monodromy);
    let c = cocycle_check(
        &r.reconstruction.potential,
        &Translation { shift: Point2::new(1.0, 0.0) },
        Basis::Affine,
        &torus_base_samples(&lift, [1.0, 1.0]),
        1,
        1,
    )
    .unwrap();
    assert!(c.telescoping_error < 1e-9);
}
