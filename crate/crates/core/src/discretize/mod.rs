//! Meshes, weighted operators, norms and boundary fluxes.

mod assembly;
mod mesh;
mod norms;
pub mod quadrature;

pub use assembly::{assemble, weighted_mass, OperatorPair};
pub use mesh::{build_mesh, Mesh, MeshDomain};
pub use norms::{
    boundary_flux, boundary_flux_fd, boundary_inner, boundary_lumped_mass, hardy_bound, hardy_check, norms,
    poincare_check, HardyCheck, Norms, HARDY_TOL,
};
