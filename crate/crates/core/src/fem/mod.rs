//! P1 finite-element assembly and linear solves for scalar and 2-vector fields.

mod assemble;
mod solve;
mod sparse;

pub use assemble::{
    assemble_elasticity, assemble_lumped_mass, assemble_scalar_diffusion, boundary_load,
    boundary_spring, check_poisson, elasticity_element_matrix, element_displacement,
    element_strain, lumped_mass_diagonal, scalar_element_matrix, strain_energy_density,
    voigt_matrix,
};
pub use solve::{solve, solve_from, DEFAULT_TOL};
pub use sparse::{DofMap, SparseSystem};
