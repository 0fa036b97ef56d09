//! Discrete variational problems: the weighted p-Dirichlet energy on grid
//! domains and one-dimensional discrete actions, with a descent solver.

pub mod domain;
pub mod energy;
pub mod ode;
pub mod problem;
pub mod solver;

pub use domain::{angular_lift, lift_annulus, Annulus, BoundarySpec, Domain};
pub use energy::{el_residual_2d, energy_total, flux_field, DirichletEnergy, PDirichletSpec, DEFAULT_EPSILON};
pub use ode::{solve_ode_1d, DiscreteAction, Lagrangian1D, OdeSolution};
pub use problem::solve_dirichlet;
pub use solver::{minimize, ConvergenceReport, Objective, SolverConfig};
