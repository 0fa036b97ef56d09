use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use noether_core::calculus::{closedness_residual_on, covariant_divergence, hessian_fd};
use noether_core::geometry::{
    hamiltonian_vector, killing_eval, Dilation, Generator, GeometryModel, Point2, Sym2, Translation,
};
use noether_core::grid::{Grid2, Region, ScalarField, SymTensorField};
use noether_core::io::{write_one_form, write_scalar, write_tensor};
use noether_core::jet::Jet2;
use noether_core::noether::{
    dual_tensor, energy_1d, flux_constancy, killing_currents, rotation_current, stress_tensor,
    translation_momentum_check,
};
use noether_core::potential::presets::{
    analytic_kernel_operator, cylinder_potential, invariant_potential, torus_bilinear, torus_quadratic,
};
use noether_core::potential::{
    cocycle_check, kernel_residual_analytic, kernel_residual_fd, monodromy, project_to_kernel, reachable_nodes,
    reconstruct, reconstruct_flat_torus, torus_base_samples, Basis, MonodromyOptions, ReconstructionOptions,
    SectorDomain,
};
use noether_core::variational::{
    angular_lift, lift_annulus, solve_dirichlet, solve_ode_1d, BoundarySpec, DirichletEnergy, Lagrangian1D,
    PDirichletSpec,
};
use noether_core::Error as CoreError;

use crate::config::{ConfigError, Dump, Model, Preset, ProblemConfig, ProblemKind, RunConfig, SHIPPED};
use crate::report::RunReport;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

type Result<T> = std::result::Result<T, CommandError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    KernelVerify,
    Solve,
    Currents,
    Reconstruct,
    Monodromy,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KernelVerify => "kernel-verify",
            Command::Solve => "solve",
            Command::Currents => "currents",
            Command::Reconstruct => "reconstruct",
            Command::Monodromy => "monodromy",
            Command::All => "all",
        }
    }
}

/// Where CSV dumps go; `None` disables them.
pub struct Sink<'a> {
    pub directory: &'a Path,
    pub prefix: String,
}

impl Sink<'_> {
    fn write(&self, what: &str, f: impl FnOnce(BufWriter<File>) -> noether_core::Result<()>) -> Result<()> {
        let path = self.directory.join(format!("{}-{what}.csv", self.prefix));
        let err = |m: String| CommandError::Output { path: path.clone(), message: m };
        std::fs::create_dir_all(self.directory).map_err(|e| err(e.to_string()))?;
        let file = File::create(&path).map_err(|e| err(e.to_string()))?;
        f(BufWriter::new(file)).map_err(|e| err(e.to_string()))
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid(msg.into()).into())
}

fn spec(problem: &ProblemConfig, model: GeometryModel) -> Result<PDirichletSpec> {
    PDirichletSpec::with_epsilon(problem.p, model, problem.epsilon).map_err(|e| ConfigError::Invalid(e.to_string()).into())
}

/// Radial p-harmonic profile with `u(R₁) = 0`, `u(R₂) = 1`, and its flux `2π r|u'|^{p−2}u'`.
fn radial(p: f64, r1: f64, r2: f64) -> (impl Fn(f64) -> f64 + Copy, f64) {
    let k = (p - 2.0) / (p - 1.0);
    let flux = if k == 0.0 {
        std::f64::consts::TAU / (r2 / r1).ln()
    } else {
        let a = 1.0 / (r2.powf(k) - r1.powf(k));
        std::f64::consts::TAU * (a * k).powf(p - 1.0)
    };
    let u = move |r: f64| {
        let r = r.max(1e-9);
        if k == 0.0 {
            (r / r1).ln() / (r2 / r1).ln()
        } else {
            (r.powf(k) - r1.powf(k)) / (r2.powf(k) - r1.powf(k))
        }
    };
    (u, flux)
}

struct Boundary {
    bc: BoundarySpec,
    exact: Option<Box<dyn Fn(Point2) -> f64>>,
    tolerance: f64,
    flux: Option<f64>,
}

fn boundary(cfg: &RunConfig, grid: Grid2, preset: Preset) -> Result<Boundary> {
    let d = cfg.domain()?;
    let problem = cfg.problem()?;
    let annulus = d.annulus.map(|a| a.annulus());
    let make = |f: &dyn Fn(Point2) -> f64| -> Result<BoundarySpec> {
        match annulus {
            Some(a) => BoundarySpec::annulus(grid, a, f).map_err(|e| ConfigError::Invalid(e.to_string()).into()),
            None => Ok(BoundarySpec::rectangle(grid, f)),
        }
    };
    Ok(match preset {
        Preset::LinearX => {
            let exact = grid.model == GeometryModel::Flat && annulus.is_none();
            Boundary {
                bc: make(&|p| p.x)?,
                exact: exact.then(|| Box::new(|p: Point2| p.x) as Box<dyn Fn(Point2) -> f64>),
                tolerance: 1e-6,
                flux: None,
            }
        }
        Preset::Smooth => Boundary {
            bc: make(&|p| p.x + 0.3 * p.x * p.y + 0.2 * p.y * p.y)?,
            exact: None,
            tolerance: 0.0,
            flux: None,
        },
        Preset::Radial => {
            let Some(a) = annulus else { return bad("the radial preset needs an annulus") };
            if grid.model != GeometryModel::Flat {
                return bad("the radial preset needs the flat model");
            }
            let (u, flux) = radial(problem.p, a.r_inner, a.r_outer);
            let c = a.center;
            Boundary {
                bc: make(&move |p| u((p - c).norm()))?,
                exact: Some(Box::new(move |p| u((p - c).norm()))),
                tolerance: 5e-2,
                flux: Some(flux),
            }
        }
        Preset::Angle => {
            let Some(a) = annulus else { return bad("the angle preset needs an annulus") };
            if d.winding == 0 {
                return bad("the angle preset needs a non-zero winding number");
            }
            let lift = angular_lift(&grid, a.center, d.winding);
            let bc = lift_annulus(&make(&lift)?, d.winding).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let lift = angular_lift(&grid, a.center, d.winding);
            Boundary { bc, exact: Some(Box::new(lift)), tolerance: 5e-2, flux: None }
        }
        other => return bad(format!("{other:?} is not a boundary-data preset")),
    })
}

fn solve_field(cfg: &RunConfig, grid: Grid2, preset: Preset, report: &mut RunReport, tag: &str) -> Result<Option<(PDirichletSpec, ScalarField, Boundary)>> {
    let problem = cfg.problem()?;
    let spec = spec(problem, grid.model)?;
    let b = boundary(cfg, grid, preset)?;
    let solver = cfg.solver_section();
    match solve_dirichlet(&spec, &b.bc, &solver.solver()) {
        Ok((u, rep)) => {
            report.holds(format!("{tag}converged"), rep.converged);
            let el = DirichletEnergy::new(spec, &b.bc.domain).map(|e| e.residual(&u.values));
            match el {
                Ok(el) => report.at_most(format!("{tag}el-residual"), el.iter().fold(0.0f64, |m, v| m.max(v.abs())), solver.tolerance),
                Err(e) => report.failure(format!("{tag}el-residual"), e.to_string()),
            }
            report.stat(format!("{tag}solver"), &rep);
            Ok(Some((spec, u, b)))
        }
        Err(e) => {
            report.failure(format!("{tag}solve"), e.to_string());
            Ok(None)
        }
    }
}

fn lagrangian(preset: Preset) -> Result<(Lagrangian1D, fn(f64) -> f64)> {
    match preset {
        Preset::Oscillator => Ok((Lagrangian1D::oscillator(), f64::sin)),
        Preset::FreeParticle => Ok((Lagrangian1D::free_particle(), |t| t)),
        other => bad(format!("{other:?} is not a 1D preset")),
    }
}

fn solve_1d(cfg: &RunConfig, report: &mut RunReport) -> Result<Option<(Lagrangian1D, Vec<f64>, f64)>> {
    let problem = cfg.problem()?;
    let (lag, exact) = lagrangian(problem.preset)?;
    let (t, n) = (problem.duration, problem.steps);
    let solver = cfg.solver_section();
    match solve_ode_1d(&lag, exact(0.0), exact(t), t, n, &solver.solver()) {
        Ok(sol) => {
            report.holds("converged", sol.report.converged);
            report.at_most("stationarity-residual", sol.report.residual, solver.tolerance);
            let err = sol.times.iter().zip(&sol.values).map(|(&t, &v)| (v - exact(t)).abs()).fold(0.0, f64::max);
            report.at_most("trajectory-error", err, 1e-4);
            report.stat("solver", &sol.report);
            Ok(Some((lag, sol.values, t / n as f64)))
        }
        Err(e) => {
            report.failure("solve", e.to_string());
            Ok(None)
        }
    }
}

fn wants(cfg: &RunConfig, d: Dump) -> bool {
    cfg.output.dumps.contains(&d)
}

pub fn kernel_verify(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let d = cfg.domain()?;
    if d.model != Model::Hyperbolic {
        return bad("kernel-verify needs the hyperbolic model");
    }
    let g = d.grid()?;
    for a in Generator::ALL {
        match kernel_residual_analytic(&g, a) {
            Ok(r) => report.at_most(format!("analytic-residual-{}", a.label()), r, 1e-12),
            Err(e) => report.failure(format!("analytic-residual-{}", a.label()), e.to_string()),
        }
        let mut worst = 0.0f64;
        for (i, j) in g.nodes() {
            let p = g.point(i, j);
            match hamiltonian_vector(a, p) {
                Ok(v) => worst = worst.max((v + killing_eval(a, p)).norm_inf()),
                Err(_) => worst = f64::NAN,
            }
        }
        report.at_most(format!("hamiltonian-{}", a.label()), worst, 1e-12);
        if let Ok(r) = kernel_residual_fd(&g, a) {
            report.stat(format!("fd-residual-{}", a.label()), r);
        }
    }
    if let Some([n1, n2]) = d.convergence {
        let (g1, g2) = (d.grid_at(n1)?, d.grid_at(n2)?);
        for a in Generator::ALL {
            match (kernel_residual_fd(&g1, a), kernel_residual_fd(&g2, a)) {
                (Ok(r1), Ok(r2)) => report.at_least(format!("fd-order-{}", a.label()), (r1 / r2).log2() / ((n2 - 1) as f64 / (n1 - 1) as f64).log2(), 1.5),
                (Err(e), _) | (_, Err(e)) => report.failure(format!("fd-order-{}", a.label()), e.to_string()),
            }
        }
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig, report: &mut RunReport, sink: Option<&Sink>) -> Result<()> {
    let problem = cfg.problem()?;
    match problem.kind {
        ProblemKind::Ode1d => {
            if let Some((_, values, h)) = solve_1d(cfg, report)? {
                report.stat("step", h);
                if let (Some(s), true) = (sink, wants(cfg, Dump::Solution)) {
                    let g = Grid2::new(GeometryModel::Flat, Point2::new(0.0, 0.0), h, 1.0, values.len(), 3)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    let f = ScalarField::new(g, ndarray::Array2::from_shape_fn(g.shape(), |(i, _)| values[i]))
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    s.write("solution", |w| write_scalar(w, &f))?;
                }
            }
        }
        ProblemKind::PDirichlet => {
            let g = cfg.domain()?.grid()?;
            if let Some((_, u, b)) = solve_field(cfg, g, problem.preset, report, "")? {
                if let Some(exact) = &b.exact {
                    let err = g.nodes().map(|(i, j)| (u.values[[i, j]] - exact(g.point(i, j))).abs()).fold(0.0, f64::max);
                    report.at_most("error-vs-exact", err, b.tolerance);
                }
                if let (Some(s), true) = (sink, wants(cfg, Dump::Solution)) {
                    s.write("solution", |w| write_scalar(w, &u))?;
                }
            }
        }
        other => return bad(format!("solve runs ode1d or p-dirichlet problems, not {other:?}")),
    }
    Ok(())
}

/// Middle half of the domain in each direction, away from boundary stencils.
fn inner_window(g: &Grid2) -> Region {
    let (x0, x1, y0, y1) = (g.x0, g.x_max(), g.y0, g.y_max());
    let (dx, dy) = ((x1 - x0) / 4.0, (y1 - y0) / 4.0);
    Region::from_mask(ndarray::Array2::from_shape_fn(g.shape(), |(i, j)| {
        let p = g.point(i, j);
        p.x >= x0 + dx && p.x <= x1 - dx && p.y >= y0 + dy && p.y <= y1 - dy
    }))
}

pub fn currents(cfg: &RunConfig, report: &mut RunReport, sink: Option<&Sink>) -> Result<()> {
    let problem = cfg.problem()?;
    match problem.kind {
        ProblemKind::Ode1d => {
            if let Some((lag, values, h)) = solve_1d(cfg, report)? {
                match energy_1d(&lag, &values, h) {
                    Ok(e) => {
                        report.at_most("energy-drift", e.relative_drift(), 1e-3);
                        report.at_most("energy-mean-error", (e.mean() - 0.5).abs(), 1e-3);
                        report.stat("energy-mean", e.mean());
                    }
                    Err(e) => report.failure("energy", e.to_string()),
                }
            }
            return Ok(());
        }
        ProblemKind::PDirichlet => {}
        other => return bad(format!("currents runs ode1d or p-dirichlet problems, not {other:?}")),
    }
    let d = cfg.domain()?;
    match d.model {
        Model::Flat => {
            let g = d.grid()?;
            let Some((spec, u, b)) = solve_field(cfg, g, problem.preset, report, "")? else { return Ok(()) };
            let theta = rotation_current(&spec, &u).expect("spec matches the solved grid");
            report.stat("rotation-current-closedness", closedness_residual_on(&theta, &b.bc.domain.free_region()));
            if let Some(a) = &d.annulus {
                if problem.radii.is_empty() {
                    return bad("flux constancy needs problem.radii");
                }
                match flux_constancy(&theta, a.annulus().center, &problem.radii, problem.vertices) {
                    Ok(v) => {
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(x.abs()), h.max(x.abs())));
                        report.at_most("flux-spread", (hi - lo) / mean.abs(), 2e-2);
                        if let Some(exact) = b.flux {
                            report.at_most("flux-vs-radial-oracle", (mean.abs() - exact).abs() / exact, 2e-2);
                        }
                        report.stat("fluxes", &v);
                    }
                    Err(e) => report.failure("flux-constancy", e.to_string()),
                }
            } else {
                match translation_momentum_check(&spec, &u, &Region::interior(&g, 2)) {
                    Ok(m) => report.stat("momentum", &m),
                    Err(e) => report.failure("momentum", e.to_string()),
                }
            }
            if let Some(s) = sink {
                if wants(cfg, Dump::Current) {
                    s.write("current", |w| write_one_form(w, &theta))?;
                }
                if wants(cfg, Dump::Stress) {
                    let st = stress_tensor(&spec, &u).expect("spec matches the solved grid");
                    s.write("stress", |w| write_tensor(w, &st))?;
                }
                if wants(cfg, Dump::Solution) {
                    s.write("solution", |w| write_scalar(w, &u))?;
                }
            }
        }
        Model::Hyperbolic => {
            let Some([n1, n2]) = d.convergence else { return bad("hyperbolic currents need domain.convergence") };
            let mut sets = Vec::new();
            for n in [n1, n2] {
                let g = d.grid_at(n)?;
                let Some((spec, u, _)) = solve_field(cfg, g, problem.preset, report, &format!("n{n}-"))? else { return Ok(()) };
                let s = stress_tensor(&spec, &u).expect("spec matches the solved grid");
                let region = inner_window(&g);
                let div = covariant_divergence(&s);
                let dv = region.nodes().map(|(i, j)| div.at(i, j).0[0].abs().max(div.at(i, j).0[1].abs())).fold(0.0, f64::max);
                let k = killing_currents(&s).expect("hyperbolic grid").closedness_on(&region);
                let mut row = vec![("stress-divergence".to_string(), dv)];
                row.extend(k.into_iter().map(|(l, v)| (format!("killing-closedness-{l}"), v)));
                report.stat(format!("n{n}-residuals"), &row);
                if n == n2 {
                    if let Some(sk) = sink {
                        if wants(cfg, Dump::Stress) {
                            sk.write("stress", |w| write_tensor(w, &s))?;
                        }
                        if wants(cfg, Dump::Solution) {
                            sk.write("solution", |w| write_scalar(w, &u))?;
                        }
                    }
                }
                sets.push(row);
            }
            let ratio = ((n2 - 1) as f64 / (n1 - 1) as f64).log2();
            for ((name, a), (_, b)) in sets[0].iter().zip(&sets[1]) {
                report.at_least(format!("order-{name}"), (a / b).log2() / ratio, 1.5);
            }
        }
    }
    Ok(())
}

fn manufactured(x: Jet2, y: Jet2) -> Jet2 {
    (x * y).sin() + y.ln()
}

fn reconstruction_options(cfg: &RunConfig) -> Result<ReconstructionOptions> {
    let s = cfg.solver_section();
    Ok(ReconstructionOptions {
        integrability_threshold: cfg.problem()?.integrability_threshold,
        tolerance: s.lsq_tolerance,
        max_iterations: s.lsq_max_iterations,
    })
}

/// `S*` for the configured preset, with the exact potential when one is known.
#[allow(clippy::type_complexity)]
fn sstar(cfg: &RunConfig, grid: Grid2, report: &mut RunReport, tag: &str) -> Result<Option<(SymTensorField, Option<Box<dyn Fn(Point2) -> f64>>)>> {
    let problem = cfg.problem()?;
    match problem.preset {
        Preset::SolveDual | Preset::PerturbedSolveDual => {
            let source = problem.source.unwrap_or(Preset::LinearX);
            let Some((spec, u, _)) = solve_field(cfg, grid, source, report, tag)? else { return Ok(None) };
            let mut s = dual_tensor(&stress_tensor(&spec, &u).expect("spec matches the solved grid"));
            if problem.preset == Preset::PerturbedSolveDual {
                for (i, j) in grid.nodes() {
                    let y = grid.point(i, j).y;
                    s.set(i, j, s.at(i, j) + Sym2::new(0.25 * y, 0.0, 0.0));
                }
            }
            // u = x on the flat model: E = −x²/(2p) + (1 − 1/p) y²/2
            let p = problem.p;
            let exact = (source == Preset::LinearX && grid.model == GeometryModel::Flat && problem.preset == Preset::SolveDual)
                .then(|| Box::new(move |q: Point2| -q.x * q.x / (2.0 * p) + (1.0 - 1.0 / p) * q.y * q.y / 2.0) as Box<dyn Fn(Point2) -> f64>);
            Ok(Some((s, exact)))
        }
        Preset::Manufactured => {
            if grid.model != GeometryModel::HyperbolicHalfPlane {
                return bad("the manufactured preset needs the hyperbolic model");
            }
            let s = SymTensorField::from_fn(grid, analytic_kernel_operator(manufactured));
            Ok(Some((s, Some(Box::new(|p: Point2| manufactured(Jet2::constant(p.x), Jet2::constant(p.y)).v)))))
        }
        other => bad(format!("{other:?} is not a reconstruction preset")),
    }
}

/// Sup-norm difference modulo the model's kernel (affine or `{k_α}`).
fn error_modulo_kernel(e: &ScalarField, exact: &dyn Fn(Point2) -> f64) -> f64 {
    let g = e.grid;
    let mut diff = ScalarField::from_fn(g, |p| -exact(p));
    diff.values += &e.values;
    if g.model.is_hyperbolic() {
        return project_to_kernel(&diff, None).map(|p| p.residual).unwrap_or(f64::NAN);
    }
    let pts: Vec<Point2> = g.nodes().map(|(i, j)| g.point(i, j)).collect();
    let vals: Vec<f64> = diff.values.iter().copied().collect();
    noether_core::potential::fit_basis(Basis::Affine, &pts, &vals).map(|p| p.residual).unwrap_or(f64::NAN)
}

pub fn reconstruct_cmd(cfg: &RunConfig, report: &mut RunReport, sink: Option<&Sink>) -> Result<()> {
    let problem = cfg.problem()?;
    if problem.kind != ProblemKind::Reconstruction {
        return bad("reconstruct needs problem.kind = \"reconstruction\"");
    }
    let d = cfg.domain()?;
    let opts = reconstruction_options(cfg)?;
    let resolutions: Vec<usize> = match (problem.preset, d.convergence) {
        (Preset::Manufactured, Some([a, b])) => vec![a, b],
        _ => vec![d.resolution],
    };
    let mut errors = Vec::new();
    for &n in &resolutions {
        let tag = if resolutions.len() > 1 { format!("n{n}-") } else { String::new() };
        let g = d.grid_at(n)?;
        let Some((s, exact)) = sstar(cfg, g, report, &tag)? else { return Ok(()) };
        match reconstruct(&s, &opts) {
            Ok(r) => {
                if problem.expect_rejection {
                    report.holds(format!("{tag}rejected"), false);
                }
                report.at_most(format!("{tag}integrability"), r.closedness, r.threshold);
                report.stat(format!("{tag}reconstruction"), &r);
                if let Some(exact) = exact {
                    let err = error_modulo_kernel(&r.potential, &*exact);
                    if resolutions.len() == 1 {
                        report.at_most("error-modulo-kernel", err, 1e-6);
                    } else {
                        report.stat(format!("{tag}error-modulo-kernel"), err);
                    }
                    errors.push(err);
                }
                if let (Some(sk), true) = (sink, wants(cfg, Dump::Potential)) {
                    sk.write(&format!("{tag}potential"), |w| write_scalar(w, &r.potential))?;
                }
            }
            Err(e @ CoreError::Integrability { .. }) if problem.expect_rejection => {
                report.holds(format!("{tag}rejected"), true);
                report.stat(format!("{tag}diagnostic"), e.to_string());
            }
            Err(e) => report.failure(format!("{tag}reconstruction"), e.to_string()),
        }
    }
    if let ([a, b], [n1, n2]) = (errors.as_slice(), resolutions.as_slice()) {
        report.at_least("order-error-modulo-kernel", (a / b).log2() / ((n2 - 1) as f64 / (n1 - 1) as f64).log2(), 1.5);
    }
    Ok(())
}

pub fn monodromy_cmd(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let problem = cfg.problem()?;
    if problem.kind != ProblemKind::Monodromy {
        return bad("monodromy needs problem.kind = \"monodromy\"");
    }
    let d = cfg.domain()?;
    let lsq = reconstruction_options(cfg)?;
    let [m, n] = problem.cocycle;
    match problem.preset {
        Preset::Cylinder | Preset::Invariant => {
            if d.model != Model::Hyperbolic {
                return bad("cylinder monodromy needs the hyperbolic model");
            }
            let Some(lambda) = d.lambda else { return bad("cylinder monodromy needs domain.lambda") };
            let g = d.grid()?;
            let (s, expect, tol) = if problem.preset == Preset::Cylinder {
                (SymTensorField::from_fn(g, analytic_kernel_operator(cylinder_potential(lambda))), [1.0, 0.0, 0.0], 1e-3)
            } else {
                (SymTensorField::from_fn(g, analytic_kernel_operator(invariant_potential())), [0.0; 3], 5e-3)
            };
            let sector = SectorDomain { r_min: problem.sector_r_min, half_angle: problem.sector_half_angle };
            let opts = MonodromyOptions { reconstruction: lsq, ..Default::default() };
            let r = match monodromy(&s, lambda, 1, &sector, &opts) {
                Ok(r) => r,
                Err(e) => {
                    report.failure("monodromy", e.to_string());
                    return Ok(());
                }
            };
            let err = (0..3).map(|k| (r.coefficients[k] - expect[k]).abs()).fold(0.0, f64::max);
            report.at_most("coefficient-error", err, tol);
            report.at_most("projection-residual", r.residual, 1e-3);
            report.stat("monodromy", &r);
            let gamma = Dilation::new(lambda).expect("validated lambda");
            let samples = reachable_nodes(&g, &gamma, &[n, m + n]);
            match cocycle_check(&r.reconstruction.potential, &gamma, Basis::HyperbolicKernel, &samples, m, n) {
                Ok(c) => {
                    report.at_most("telescoping-error", c.telescoping_error, 1e-10);
                    report.stat("cocycle", &c);
                }
                Err(e) => report.failure("cocycle", e.to_string()),
            }
        }
        Preset::TorusQuadratic | Preset::TorusBilinear => {
            if d.model != Model::Flat {
                return bad("torus monodromy needs the flat model");
            }
            let periods = d.periods.unwrap_or([1.0, 1.0]);
            let res = d.resolution;
            let (hx, hy) = (periods[0] / res as f64, periods[1] / res as f64);
            // three periods in x for the γ² cocycle, two in y
            let lift = Grid2::new(GeometryModel::Flat, Point2::new(d.x[0], d.y[0]), hx, hy, 3 * res + 1, 2 * res + 1)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let (e, expect) = if problem.preset == Preset::TorusQuadratic {
                let a = problem.alpha;
                // E(x + L₁) − E(x) = 2αL₁x + αL₁²
                let l = periods[0];
                (ScalarField::from_fn(lift, torus_quadratic(a, periods)), [[2.0 * a * l, 0.0, a * l * l], [0.0; 3]])
            } else {
                let b = problem.beta;
                (ScalarField::from_fn(lift, torus_bilinear(b, periods)), [[0.0, b * periods[0], 0.0], [b * periods[1], 0.0, 0.0]])
            };
            let t = match reconstruct_flat_torus(&hessian_fd(&e), periods, &lsq) {
                Ok(t) => t,
                Err(e) => {
                    report.failure("torus-reconstruction", e.to_string());
                    return Ok(());
                }
            };
            for k in 0..2 {
                let err = (0..3).map(|c| (t.monodromy[k][c] - expect[k][c]).abs()).fold(0.0, f64::max);
                report.at_most(format!("generator-{}-affine-error", k + 1), err, 1e-6);
            }
            report.stat("torus", &t);
            let shift = Translation { shift: Point2::new(periods[0], 0.0) };
            match cocycle_check(&t.reconstruction.potential, &shift, Basis::Affine, &torus_base_samples(&lift, periods), m, n) {
                Ok(c) => {
                    report.at_most("telescoping-error", c.telescoping_error, 1e-9);
                    report.stat("cocycle", &c);
                }
                Err(e) => report.failure("cocycle", e.to_string()),
            }
        }
        other => return bad(format!("{other:?} is not a monodromy preset")),
    }
    Ok(())
}

/// Run one configuration under `command` and return its report.
pub fn run(command: Command, name: &str, cfg: &RunConfig, out: Option<&Path>) -> Result<RunReport> {
    let mut report = RunReport::new(name, command.name());
    report.config = serde_json::to_value(cfg).ok();
    let sink = out.map(|directory| Sink { directory, prefix: name.to_string() });
    match command {
        Command::KernelVerify => kernel_verify(cfg, &mut report)?,
        Command::Solve => solve(cfg, &mut report, sink.as_ref())?,
        Command::Currents => currents(cfg, &mut report, sink.as_ref())?,
        Command::Reconstruct => reconstruct_cmd(cfg, &mut report, sink.as_ref())?,
        Command::Monodromy => monodromy_cmd(cfg, &mut report)?,
        Command::All => return all(cfg, out, None),
    }
    report.apply_overrides(&cfg.output.tolerances);
    Ok(report)
}

fn command_for(name: &str) -> Command {
    match name.split('-').next() {
        Some("kernel") => Command::KernelVerify,
        Some("solve") => Command::Solve,
        Some("currents") => Command::Currents,
        Some("reconstruct") => Command::Reconstruct,
        _ => Command::Monodromy,
    }
}

/// Every shipped configuration, with the caller's solver section, tolerance
/// overrides and resolution override applied to each.
pub fn all(cfg: &RunConfig, out: Option<&Path>, resolution: Option<usize>) -> Result<RunReport> {
    let mut report = RunReport::new("all", Command::All.name());
    report.config = serde_json::to_value(cfg).ok();
    for (name, text) in SHIPPED {
        let mut sub = RunConfig::parse(text, Path::new(name))?;
        if cfg.solver.is_some() {
            sub.solver = cfg.solver;
        }
        if let Some(n) = resolution {
            sub.override_resolution(n)?;
        }
        sub.output.tolerances.extend(cfg.output.tolerances.clone());
        sub.output.dumps = cfg.output.dumps.clone();
        report.add_run(run(command_for(name), name, &sub, out)?);
    }
    Ok(report)
}
