//! State and adjoint solves, objectives, sensitivities and the volume constraint
//! for the compliance, compliant-mechanism and heat-conduction problems.

mod check;
mod constraint;
mod dual;
mod elasticity;
mod heat;

pub use check::directional_error;
pub use constraint::{
    multiplier_combine, volume_constraint, volume_fraction, Combined, ConstraintState,
};
pub use dual::{dual_energy_oracle, DualEnergyResult};
pub use elasticity::{
    compliance_gradient, compliance_sensitivity, mechanism_gradient, mechanism_sensitivity,
    mutual_energy_density, solve_compliance_state, solve_mechanism, ComplianceState,
    ElasticitySpec, Matrix2, MechanismState, OutputPort,
};
pub use heat::{heat_gradient, heat_sensitivity, solve_heat, HeatSpec, HeatState};
