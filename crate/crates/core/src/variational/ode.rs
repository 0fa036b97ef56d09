use crate::error::{Error, Result};
use crate::variational::solver::{minimize, ConvergenceReport, Objective, SolverConfig};

type Fn2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// An autonomous Lagrangian `L(y, y')` with its two partial derivatives.
pub struct Lagrangian1D {
    pub name: String,
    l: Fn2,
    dl_dy: Fn2,
    dl_dv: Fn2,
}

impl std::fmt::Debug for Lagrangian1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lagrangian1D").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Lagrangian1D {
    pub fn new(
        name: impl Into<String>,
        l: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dl_dy: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dl_dv: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Lagrangian1D { name: name.into(), l: Box::new(l), dl_dy: Box::new(dl_dy), dl_dv: Box::new(dl_dv) }
    }

    /// `L = ½ y'²`.
    pub fn free_particle() -> Self {
        Self::new("free-particle", |_, v| 0.5 * v * v, |_, _| 0.0, |_, v| v)
    }

    /// `L = ½ y'² − ½ y²`.
    pub fn oscillator() -> Self {
        Self::new("oscillator", |y, v| 0.5 * (v * v - y * y), |y, _| -y, |_, v| v)
    }

    pub fn eval(&self, y: f64, v: f64) -> f64 {
        (self.l)(y, v)
    }

    pub fn dy(&self, y: f64, v: f64) -> f64 {
        (self.dl_dy)(y, v)
    }

    pub fn dv(&self, y: f64, v: f64) -> f64 {
        (self.dl_dv)(y, v)
    }

    /// Compare the supplied partials with central differences at the probe
    /// points; returns the largest relative mismatch.
    pub fn check_partials(&self, probes: &[(f64, f64)]) -> f64 {
        let d = 1e-5;
        probes
            .iter()
            .map(|&(y, v)| {
                let fy = (self.eval(y + d, v) - self.eval(y - d, v)) / (2.0 * d);
                let fv = (self.eval(y, v + d) - self.eval(y, v - d)) / (2.0 * d);
                let ey = (fy - self.dy(y, v)).abs() / (1.0 + fy.abs());
                let ev = (fv - self.dv(y, v)).abs() / (1.0 + fv.abs());
                ey.max(ev)
            })
            .fold(0.0, f64::max)
    }
}

/// The discrete action `Σ L(u_i, (u_{i+1} − u_i)/h) h` over interior values
/// with fixed endpoints.
pub struct DiscreteAction<'a> {
    pub lagrangian: &'a Lagrangian1D,
    pub h: f64,
    pub start: f64,
    pub end: f64,
}

impl DiscreteAction<'_> {
    fn node(&self, x: &[f64], i: usize) -> f64 {
        match i {
            0 => self.start,
            i if i == x.len() + 1 => self.end,
            i => x[i - 1],
        }
    }

    pub fn full_path(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len() + 2).map(|i| self.node(x, i)).collect()
    }
}

impl Objective for DiscreteAction<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len() + 1;
        (0..n)
            .map(|i| {
                let (a, b) = (self.node(x, i), self.node(x, i + 1));
                self.lagrangian.eval(a, (b - a) / self.h) * self.h
            })
            .sum()
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let n = x.len() + 1;
        let mut s = 0.0;
        for i in 0..n {
            let (a, b) = (self.node(x, i), self.node(x, i + 1));
            let v = (b - a) / self.h;
            s += self.lagrangian.eval(a, v) * self.h;
            let ly = self.lagrangian.dy(a, v) * self.h;
            let lv = self.lagrangian.dv(a, v);
            if i >= 1 {
                g[i - 1] += ly - lv;
            }
            if i + 1 < n {
                g[i] += lv;
            }
        }
        s
    }

    /// Discrete Euler–Lagrange residual `∂S/∂u_i / h`.
    fn residual_norm(&self, g: &[f64]) -> f64 {
        g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.h
    }
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    /// Node times `t_i = i h`, `i = 0..=n`.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub report: ConvergenceReport,
}

/// Minimise the discrete action on `[0, duration]` with `n` intervals and
/// endpoint values `start`, `end`, starting from the straight line.
pub fn solve_ode_1d(
    lagrangian: &Lagrangian1D,
    start: f64,
    end: f64,
    duration: f64,
    n: usize,
    cfg: &SolverConfig,
) -> Result<OdeSolution> {
    if n < 2 {
        return Err(Error::GridTooSmall { nx: n + 1, ny: 1, min: 3 });
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    let h = duration / n as f64;
    let action = DiscreteAction { lagrangian, h, start, end };
    let x0 = (1..n).map(|i| start + (end - start) * i as f64 / n as f64).collect();
    let (x, report) = minimize(&action, x0, cfg)?;
    Ok(OdeSolution { times: (0..=n).map(|i| i as f64 * h).collect(), values: action.full_path(&x), report })
}
