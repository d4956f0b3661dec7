//! POD–Galerkin reduced model of the interface control problem.

pub mod archive;
mod operators;
mod solver;

pub use archive::{read_named_arrays, write_named_arrays};
pub use operators::{augmented_basis, project_operators, ReducedOperators, SubdomainOperators};
pub use solver::{
    augment, lift_run, lift_to_fom, lift_velocity, rom_config, rom_time_loop, ReducedState, RomProblem, RomRun,
};

use crate::error::Result;
use crate::fem::{assemble_divergence, assemble_pressure_mass, assemble_scalar_stiffness, block_diag2, TaylorHoodSpace};
use crate::linalg::smallest_generalized_singular_value;
use crate::pod::ReducedBasis;

/// Reduced inf-sup constant: smallest generalised singular value of
/// `Φ_pᵀBΦ_u` in the `Φ_uᵀKΦ_u` and `Φ_pᵀM_pΦ_p` inner products.
pub fn reduced_inf_sup(space: &TaylorHoodSpace, velocity: &ReducedBasis, pressure: &ReducedBasis) -> Result<f64> {
    let k = block_diag2(&assemble_scalar_stiffness(space));
    let b = pressure.phi.tr_matmul(&assemble_divergence(space).mul_dense(&velocity.phi))?;
    let mut xu = velocity.phi.tr_matmul(&k.mul_dense(&velocity.phi))?;
    let mut xp = pressure
        .phi
        .tr_matmul(&assemble_pressure_mass(space).mul_dense(&pressure.phi))?;
    xu.symmetrize();
    xp.symmetrize();
    smallest_generalized_singular_value(&b, &xu, &xp)
}
