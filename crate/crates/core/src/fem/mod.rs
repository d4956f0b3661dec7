//! Taylor–Hood P2/P1 finite elements.

mod assembly;
mod dirichlet;
pub mod local;
pub mod quadrature;
mod space;

pub use assembly::{
    assemble_convection, assemble_divergence, assemble_interface_coupling, assemble_load,
    assemble_mass, assemble_pressure_mass, assemble_scalar_mass, assemble_scalar_stiffness,
    assemble_stiffness, block_diag2,
};
pub(crate) use assembly::local_field;
pub use dirichlet::{apply_dirichlet, dirichlet_values};
pub use space::{ElemGeom, FieldCoeffs, InterfaceTrace, SpaceKind, TaylorHoodSpace};
