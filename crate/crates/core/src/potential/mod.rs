//! Potential reconstruction `(∇d + Rg)E = S*`, kernel projection and
//! monodromy of the reconstructed potential on quotients.

pub mod kernel;
pub mod monodromy;
pub mod presets;
pub mod reconstruct;
pub mod sparse;

pub use kernel::{fit_basis, kernel_residual_analytic, kernel_residual_fd, project_to_kernel, Basis, KernelProjection};
pub use monodromy::{
    cocycle_check, invariance_mismatch, monodromy, monodromy_of, reachable_nodes, reconstruct_flat_torus, torus_base_samples,
    CocycleReport, MonodromyOptions, MonodromyResult, SectorDomain, TorusResult,
};
pub use reconstruct::{
    default_threshold, integrability_residual, operator_matrix, reconstruct, reconstruct_flat, reconstruct_hyperbolic,
    GaugeReport, ReconstructionOptions, ReconstructionResult,
};
pub use sparse::{lsq_solve, Csr, CsrBuilder, LsqReport};
