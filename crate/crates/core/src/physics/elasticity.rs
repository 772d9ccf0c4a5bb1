use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::fem::{
    assemble_elasticity, boundary_load, boundary_spring, check_poisson, element_displacement,
    element_strain, solve_from, strain_energy_density, voigt_matrix, DofMap, SparseSystem,
    DEFAULT_TOL,
};
use crate::levelset::{delta_factor, element_material, element_to_phi_gradient, SmoothingParams};
use crate::mesh::TriMesh;

pub type Matrix2 = [[f64; 2]; 2];

/// An output port of a compliant mechanism: a tagged boundary segment with the
/// dummy traction defining the output displacement and its spring block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPort {
    pub tag: String,
    pub traction: [f64; 2],
    #[serde(default)]
    pub spring: Matrix2,
}

/// Linear elastic material, supports and loads.
///
/// Spring blocks follow the sign of the boundary integral `∫ (K u)·v` on the
/// load side of the state equation, so a restoring spring is negative definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticitySpec {
    pub young: f64,
    pub nu: f64,
    pub dirichlet_tag: String,
    pub traction_tag: String,
    pub traction: [f64; 2],
    /// Spring on the traction (input) boundary; mechanisms only.
    #[serde(default)]
    pub input_spring: Matrix2,
    /// Output ports; mechanisms only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<OutputPort>,
}

impl ElasticitySpec {
    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if !(self.young > 0.0) {
            return config_err(format!("young must be positive, got {}", self.young));
        }
        check_poisson(self.nu)?;
        for tag in [&self.dirichlet_tag, &self.traction_tag] {
            if !mesh.has_tag(tag) {
                return config_err(format!("no boundary edges carry tag `{tag}`"));
            }
        }
        for port in &self.outputs {
            if !mesh.has_tag(&port.tag) {
                return config_err(format!("no boundary edges carry output tag `{}`", port.tag));
            }
        }
        Ok(())
    }
}

/// Displacement and objective of a compliance evaluation.
#[derive(Debug, Clone)]
pub struct ComplianceState {
    pub displacement: Vec<f64>,
    pub objective: f64,
}

/// State, adjoint and objective of a mechanism evaluation.
#[derive(Debug, Clone)]
pub struct MechanismState {
    pub displacement: Vec<f64>,
    pub adjoint: Vec<f64>,
    pub objective: f64,
}

fn dirichlet_dofs(mesh: &TriMesh, spec: &ElasticitySpec) -> Result<DofMap> {
    let mut dofs = DofMap::new(mesh.num_nodes(), 2);
    dofs.fix_nodes(&mesh.nodes_with_tag(&spec.dirichlet_tag), 0.0)?;
    Ok(dofs)
}

/// Stiffness with spring terms moved to the left-hand side, before constraints.
fn mechanism_operator(
    mesh: &TriMesh,
    phi: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
) -> Result<SparseSystem> {
    let young: Vec<f64> = element_material(phi, smoothing, mesh)
        .into_iter()
        .map(|c| spec.young * c)
        .collect();
    let mut a = assemble_elasticity(mesh, &young, spec.nu)?;
    if spec.input_spring != [[0.0; 2]; 2] {
        a = a.add_scaled(
            &boundary_spring(mesh, &spec.traction_tag, spec.input_spring)?,
            -1.0,
        );
    }
    for port in &spec.outputs {
        if port.spring != [[0.0; 2]; 2] {
            a = a.add_scaled(&boundary_spring(mesh, &port.tag, port.spring)?, -1.0);
        }
    }
    Ok(a)
}

fn constrained_solve(
    a: &SparseSystem,
    rhs: &[f64],
    dofs: &DofMap,
    guess: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut a = a.clone();
    let mut b = rhs.to_vec();
    a.apply_dirichlet(&mut b, dofs);
    solve_from(&a, &b, guess, DEFAULT_TOL)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the elasticity state for the current design and returns the mean
/// compliance `t · u` on the traction boundary.
pub fn solve_compliance_state(
    mesh: &TriMesh,
    phi: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
    guess: Option<&[f64]>,
) -> Result<ComplianceState> {
    let a = mechanism_operator(mesh, phi, spec, smoothing)?;
    let f = boundary_load(mesh, &spec.traction_tag, spec.traction)?;
    let u = constrained_solve(&a, &f, &dirichlet_dofs(mesh, spec)?, guess)?;
    Ok(ComplianceState {
        objective: dot(&f, &u),
        displacement: u,
    })
}

/// Per-element `D ε(u):ε(w)` with the full Young's modulus.
pub fn mutual_energy_density(
    mesh: &TriMesh,
    u: &[f64],
    w: &[f64],
    young: f64,
    nu: f64,
) -> Vec<f64> {
    let d = voigt_matrix(nu);
    (0..mesh.num_elements())
        .map(|e| {
            let g = mesh.element_geometry(e);
            let eu = element_strain(g, &element_displacement(mesh, e, u));
            let ew = element_strain(g, &element_displacement(mesh, e, w));
            young * strain_energy_density(&d, &eu, &ew)
        })
        .collect()
}

fn weighted_nodal(
    mesh: &TriMesh,
    phi: &[f64],
    per_element: &[f64],
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    mesh.element_to_nodal(per_element)
        .into_iter()
        .zip(delta_factor(phi, smoothing))
        .map(|(s, w)| s * w)
        .collect()
}

/// Nodal strain-energy density times the delta weight; the reaction that
/// increases stiffness where it is large.
pub fn compliance_sensitivity(
    mesh: &TriMesh,
    phi: &[f64],
    u: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let dens = mutual_energy_density(mesh, u, u, spec.young, spec.nu);
    weighted_nodal(mesh, phi, &dens, smoothing)
}

fn output_load(mesh: &TriMesh, spec: &ElasticitySpec) -> Result<Vec<f64>> {
    let mut g = vec![0.0; 2 * mesh.num_nodes()];
    for port in &spec.outputs {
        for (gi, v) in g
            .iter_mut()
            .zip(boundary_load(mesh, &port.tag, port.traction)?)
        {
            *gi += v;
        }
    }
    Ok(g)
}

/// Solves the mechanism state (input traction with springs) and its adjoint
/// (negated output traction), returning `F = -t_out · u`.
pub fn solve_mechanism(
    mesh: &TriMesh,
    phi: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
    guess: Option<(&[f64], &[f64])>,
) -> Result<MechanismState> {
    let a = mechanism_operator(mesh, phi, spec, smoothing)?;
    let dofs = dirichlet_dofs(mesh, spec)?;
    let f = boundary_load(mesh, &spec.traction_tag, spec.traction)?;
    let g = output_load(mesh, spec)?;
    let u = constrained_solve(&a, &f, &dofs, guess.map(|g| g.0))?;
    let minus_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let adjoint = constrained_solve(&a, &minus_g, &dofs, guess.map(|g| g.1))?;
    Ok(MechanismState {
        objective: -dot(&g, &u),
        displacement: u,
        adjoint,
    })
}

/// Approximate derivative `-D δ(φ) ε(u):ε(ũ)` of the mechanism objective.
/// Its negative is the reaction fed to the evolution equation.
pub fn mechanism_sensitivity(
    mesh: &TriMesh,
    phi: &[f64],
    u: &[f64],
    adjoint: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let dens: Vec<f64> = mutual_energy_density(mesh, u, adjoint, spec.young, spec.nu)
        .into_iter()
        .map(|v| -v)
        .collect();
    weighted_nodal(mesh, phi, &dens, smoothing)
}

fn area_weighted(mesh: &TriMesh, dens: Vec<f64>, factor: f64) -> Vec<f64> {
    dens.into_iter()
        .zip(mesh.geometries())
        .map(|(d, g)| factor * d * g.area)
        .collect()
}

/// Exact derivative of the discrete compliance with respect to the nodal
/// level-set values, `-u^T (dA/dφ) u`.
pub fn compliance_gradient(
    mesh: &TriMesh,
    phi: &[f64],
    u: &[f64],
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let d = area_weighted(
        mesh,
        mutual_energy_density(mesh, u, u, spec.young, spec.nu),
        -1.0,
    );
    element_to_phi_gradient(mesh, phi, smoothing, Some(smoothing.chi_floor), &d)
}

/// Exact derivative of the discrete mechanism objective with respect to the
/// nodal level-set values, `-ũ^T (dA/dφ) u` with the adjoint `ũ`.
pub fn mechanism_gradient(
    mesh: &TriMesh,
    phi: &[f64],
    state: &MechanismState,
    spec: &ElasticitySpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let dens = mutual_energy_density(
        mesh,
        &state.displacement,
        &state.adjoint,
        spec.young,
        spec.nu,
    );
    let d = area_weighted(mesh, dens, -1.0);
    element_to_phi_gradient(mesh, phi, smoothing, Some(smoothing.chi_floor), &d)
}
