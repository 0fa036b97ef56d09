use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use noether_core::geometry::{GeometryModel, Point2};
use noether_core::grid::Grid2;
use noether_core::variational::{Annulus, SolverConfig, DEFAULT_EPSILON};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Flat,
    Hyperbolic,
}

impl Model {
    pub fn geometry(self) -> GeometryModel {
        match self {
            Model::Flat => GeometryModel::Flat,
            Model::Hyperbolic => GeometryModel::HyperbolicHalfPlane,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusConfig {
    pub center: [f64; 2],
    pub r_inner: f64,
    pub r_outer: f64,
}

impl AnnulusConfig {
    pub fn annulus(&self) -> Annulus {
        Annulus { center: Point2::new(self.center[0], self.center[1]), r_inner: self.r_inner, r_outer: self.r_outer }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub model: Model,
    #[serde(default = "unit_range")]
    pub x: [f64; 2],
    #[serde(default = "unit_range")]
    pub y: [f64; 2],
    /// Nodes per axis; for torus presets, nodes per period.
    pub resolution: usize,
    /// Two resolutions for convergence orders, coarse first.
    #[serde(default)]
    pub convergence: Option<[usize; 2]>,
    #[serde(default)]
    pub annulus: Option<AnnulusConfig>,
    #[serde(default)]
    pub winding: i32,
    /// Deck dilation factor of the hyperbolic cylinder.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Lattice periods of the flat torus.
    #[serde(default)]
    pub periods: Option<[f64; 2]>,
}

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

impl DomainConfig {
    pub fn grid_at(&self, n: usize) -> Result<Grid2, ConfigError> {
        Grid2::from_extents(self.model.geometry(), self.x, self.y, n, n).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid2, ConfigError> {
        self.grid_at(self.resolution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Ode1d,
    PDirichlet,
    Reconstruction,
    Monodromy,
    VerifyKernel,
}

/// Named boundary data / analytic inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `u = x` on a rectangle.
    LinearX,
    /// `x + 0.3xy + 0.2y²` on a rectangle.
    Smooth,
    /// Radial p-harmonic profile, 0 on the inner and 1 on the outer circle.
    Radial,
    /// The multivalued angle with the configured winding number.
    Angle,
    /// 1D harmonic oscillator with `y(0) = 0`, `y(T) = sin T`.
    Oscillator,
    /// 1D free particle with `y(0) = 0`, `y(T) = T`.
    FreeParticle,
    /// `S*` from the stress dual of a solve with the problem's boundary data.
    SolveDual,
    /// The same, with a non-closed perturbation added.
    PerturbedSolveDual,
    /// `(∇d + Rg)F` for `F = sin(xy) + ln y`.
    Manufactured,
    /// `E = (log r / log λ) · x/y`.
    Cylinder,
    /// `E = xy / (x² + y²)`.
    Invariant,
    /// `E = αx² + periodic`.
    TorusQuadratic,
    /// `E = βxy + periodic`.
    TorusBilinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Boundary data (solves) or analytic input (reconstruction, monodromy).
    pub preset: Preset,
    /// Boundary data of the inline solve behind the `solve-dual` presets.
    #[serde(default)]
    pub source: Option<Preset>,
    /// Circle radii for flux constancy.
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default = "default_vertices")]
    pub vertices: usize,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alpha")]
    pub beta: f64,
    /// Sector of the cylinder's fundamental domain used for sampling.
    #[serde(default = "one")]
    pub sector_r_min: f64,
    #[serde(default = "default_half_angle")]
    pub sector_half_angle: f64,
    #[serde(default = "default_cocycle")]
    pub cocycle: [i32; 2],
    /// Reconstruction: the run passes when the input is rejected.
    #[serde(default)]
    pub expect_rejection: bool,
    /// Integrability threshold; the scale-aware default when absent.
    #[serde(default)]
    pub integrability_threshold: Option<f64>,
}

fn two() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_vertices() -> usize {
    512
}
fn default_duration() -> f64 {
    1.5
}
fn default_steps() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.6
}
fn default_half_angle() -> f64 {
    0.5
}
fn default_cocycle() -> [i32; 2] {
    [1, 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    /// Relative normal-equation residual of the reconstruction solve.
    #[serde(default = "default_lsq_tol")]
    pub lsq_tolerance: f64,
    #[serde(default = "default_lsq_iter")]
    pub lsq_max_iterations: usize,
}

fn default_tol() -> f64 {
    SolverConfig::default().tolerance
}
fn default_max_iter() -> usize {
    SolverConfig::default().max_iterations
}
fn default_lsq_tol() -> f64 {
    1e-10
}
fn default_lsq_iter() -> usize {
    200_000
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tolerance: default_tol(),
            max_iterations: default_max_iter(),
            lsq_tolerance: default_lsq_tol(),
            lsq_max_iterations: default_lsq_iter(),
        }
    }
}

impl SolverSection {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig { tolerance: self.tolerance, max_iterations: self.max_iterations }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dump {
    Solution,
    Current,
    Stress,
    Potential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default)]
    pub dumps: Vec<Dump>,
    /// Check-name → tolerance replacements.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("noether-out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), dumps: Vec::new(), tolerances: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    /// Present only when the file sets it; `all` applies it to every run.
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(d) = &self.domain {
            if d.resolution < 8 {
                return invalid(format!("resolution must be at least 8, got {}", d.resolution));
            }
            if let Some([a, b]) = d.convergence {
                if a < 8 || b <= a {
                    return invalid(format!("convergence resolutions must satisfy 8 ≤ coarse < fine, got [{a}, {b}]"));
                }
            }
            if !(d.x[0] < d.x[1] && d.y[0] < d.y[1]) {
                return invalid("domain extents must be increasing intervals");
            }
            if d.model == Model::Hyperbolic && d.y[0] <= 0.0 {
                return invalid(format!("hyperbolic extents need y_min > 0, got {}", d.y[0]));
            }
            if let Some(a) = &d.annulus {
                if !(a.r_inner > 0.0 && a.r_outer > a.r_inner) {
                    return invalid("annulus radii must satisfy 0 < r_inner < r_outer");
                }
            }
            if d.winding != 0 && d.annulus.is_none() {
                return invalid("a winding number needs an annulus");
            }
            if let Some(l) = d.lambda {
                if !(l > 1.0) {
                    return invalid(format!("lambda must exceed 1, got {l}"));
                }
            }
            if let Some(p) = d.periods {
                if !(p[0] > 0.0 && p[1] > 0.0) {
                    return invalid("periods must be positive");
                }
            }
        }
        if let Some(p) = &self.problem {
            if !(p.p >= 2.0 && p.p.is_finite()) {
                return invalid(format!("p must be at least 2, got {}", p.p));
            }
            if !(p.epsilon >= 0.0) {
                return invalid("epsilon must be non-negative");
            }
        }
        if let Some(s) = &self.solver {
            if !(s.tolerance >= 0.0 && s.lsq_tolerance >= 0.0) {
                return invalid("solver tolerances must be non-negative");
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<&DomainConfig, ConfigError> {
        self.domain.as_ref().ok_or_else(|| ConfigError::Invalid("missing [domain] section".into()))
    }

    pub fn problem(&self) -> Result<&ProblemConfig, ConfigError> {
        self.problem.as_ref().ok_or_else(|| ConfigError::Invalid("missing [problem] section".into()))
    }

    pub fn solver_section(&self) -> SolverSection {
        self.solver.unwrap_or_default()
    }

    /// Replace the resolution; a convergence pair becomes `[n, 2n]`.
    pub fn override_resolution(&mut self, n: usize) -> Result<(), ConfigError> {
        if let Some(d) = &mut self.domain {
            d.resolution = n;
            if d.convergence.is_some() {
                d.convergence = Some([n, 2 * n]);
            }
        }
        self.validate()
    }
}

/// Shipped configurations, run in this order by `all`.
pub const SHIPPED: &[(&str, &str)] = &[
    ("kernel", include_str!("../configs/kernel.toml")),
    ("solve-linear", include_str!("../configs/solve-linear.toml")),
    ("solve-winding", include_str!("../configs/solve-winding.toml")),
    ("solve-oscillator", include_str!("../configs/solve-oscillator.toml")),
    ("currents-annulus-p2", include_str!("../configs/currents-annulus-p2.toml")),
    ("currents-annulus-p3", include_str!("../configs/currents-annulus-p3.toml")),
    ("currents-hyperbolic", include_str!("../configs/currents-hyperbolic.toml")),
    ("currents-oscillator", include_str!("../configs/currents-oscillator.toml")),
    ("reconstruct-flat", include_str!("../configs/reconstruct-flat.toml")),
    ("reconstruct-hyperbolic", include_str!("../configs/reconstruct-hyperbolic.toml")),
    ("reconstruct-perturbed", include_str!("../configs/reconstruct-perturbed.toml")),
    ("monodromy-cylinder", include_str!("../configs/monodromy-cylinder.toml")),
    ("monodromy-invariant", include_str!("../configs/monodromy-invariant.toml")),
    ("monodromy-torus", include_str!("../configs/monodromy-torus.toml")),
];
