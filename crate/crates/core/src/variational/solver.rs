use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Stop once the sup-norm of the scaled Euler–Lagrange residual is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-8, max_iterations: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub converged: bool,
    pub gradient_evaluations: usize,
    #[serde(skip)]
    pub energy_history: Vec<f64>,
}

impl ConvergenceReport {
    /// Largest increase between accepted iterates, relative to the energy scale.
    pub fn max_relative_increase(&self) -> f64 {
        let scale = self.energy_history.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
        self.energy_history.windows(2).map(|w| (w[1] - w[0]) / scale).fold(0.0f64, f64::max)
    }
}

/// A smooth objective over free variables. `residual_norm` maps a gradient
/// to the quantity the stopping test compares with the tolerance.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64;
    fn residual_norm(&self, g: &[f64]) -> f64;
}

/// Slack allowed when comparing energies, covering summation roundoff.
const ENERGY_SLACK: f64 = 1e-13;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy_into(out: &mut [f64], x: &[f64], t: f64, d: &[f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
        *o = xi + t * di;
    }
}

fn check_finite(v: f64, iteration: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { iteration })
    }
}

/// Nonlinear conjugate gradients (Polak–Ribière+, restarting on loss of
/// descent) with a secant line search on the directional derivative.
/// Each accepted iterate does not raise the energy beyond roundoff; if no
/// such step can be found along steepest descent the run stops unconverged.
pub fn minimize<O: Objective>(obj: &O, x0: Vec<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, ConvergenceReport)> {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut e = check_finite(obj.value_and_gradient(&x, &mut g), 0)?;
    let mut evals = 1;
    let mut history = vec![e];
    let mut residual = obj.residual_norm(&g);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let gnorm = dot(&g, &g).sqrt();
    let mut step = if gnorm > 0.0 { 1.0 / gnorm } else { 1.0 };
    let mut iterations = 0;
    let mut converged = residual <= cfg.tolerance;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let mut slope0 = dot(&g, &d);
        if slope0 >= 0.0 {
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope0 = -dot(&g, &g);
        }
        if slope0 == 0.0 {
            break;
        }

        // Secant iterations on φ'(t) = ∇E(x + t d) · d, starting from φ'(0).
        let (mut t_lo, mut s_lo) = (0.0, slope0);
        let mut t = step;
        let mut t_best = step;
        let mut e_best = f64::INFINITY;
        for _ in 0..6 {
            axpy_into(&mut xt, &x, t, &d);
            e_best = check_finite(obj.value_and_gradient(&xt, &mut gt), iterations)?;
            evals += 1;
            let s = dot(&gt, &d);
            t_best = t;
            if s.abs() <= 1e-2 * slope0.abs() {
                break;
            }
            let t_next = if s > s_lo {
                t_lo + (t - t_lo) * s_lo / (s_lo - s)
            } else {
                // no positive curvature seen yet: expand
                t_lo.max(t) * 2.0
            };
            if s < 0.0 {
                t_lo = t;
                s_lo = s;
            }
            if !(t_next.is_finite() && t_next > 0.0) {
                break;
            }
            t = t_next;
        }

        // Accept the step if the energy has not risen; otherwise backtrack.
        // `xt`, `gt` still hold the last secant evaluation, at `t_best`.
        let mut t = t_best;
        let admissible = |et: f64| et <= e + ENERGY_SLACK * e.abs().max(1.0);
        let mut accepted = admissible(e_best).then_some(e_best);
        for _ in 0..60 {
            if accepted.is_some() {
                break;
            }
            t *= 0.5;
            axpy_into(&mut xt, &x, t, &d);
            let et = check_finite(obj.value_and_gradient(&xt, &mut gt), iterations)?;
            evals += 1;
            if admissible(et) {
                accepted = Some(et);
            }
        }
        let Some(et) = accepted else {
            // No admissible step along d. Retry from steepest descent once.
            let steepest = d.iter().zip(&g).all(|(di, gi)| *di == -gi);
            if steepest {
                break;
            }
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            continue;
        };

        let gg = dot(&g, &g);
        let beta = if gg > 0.0 {
            (gt.iter().zip(&g).map(|(a, b)| a * (a - b)).sum::<f64>() / gg).max(0.0)
        } else {
            0.0
        };
        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        e = et;
        history.push(e);
        residual = obj.residual_norm(&g);
        converged = residual <= cfg.tolerance;
        d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi + beta * *di);
        step = t;
    }

    Ok((
        x,
        ConvergenceReport {
            iterations,
            residual,
            energy: e,
            converged,
            gradient_evaluations: evals,
            energy_history: history,
        },
    ))
}
