use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::fem::{
    assemble_scalar_diffusion, lumped_mass_diagonal, solve_from, DofMap, DEFAULT_TOL,
};
use crate::levelset::{delta_factor, element_chi, element_to_phi_gradient, SmoothingParams};
use crate::mesh::TriMesh;

/// Two-phase steady heat conduction: conductivity `alpha` in material,
/// `beta` in void, uniform source `source`, zero temperature on `dirichlet_tag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "unit_source")]
    pub source: f64,
    pub dirichlet_tag: String,
}

fn unit_source() -> f64 {
    1.0
}

impl HeatSpec {
    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return config_err(format!(
                "conductivities must be positive, got alpha={} beta={}",
                self.alpha, self.beta
            ));
        }
        if self.alpha == self.beta {
            return config_err("alpha and beta must differ for a two-phase problem");
        }
        if !mesh.has_tag(&self.dirichlet_tag) {
            return config_err(format!(
                "no boundary edges carry tag `{}`",
                self.dirichlet_tag
            ));
        }
        Ok(())
    }

    fn conductivity(&self, chi: f64) -> f64 {
        self.alpha * chi + self.beta * (1.0 - chi)
    }
}

#[derive(Debug, Clone)]
pub struct HeatState {
    pub temperature: Vec<f64>,
    pub objective: f64,
}

/// Solves for the temperature with per-element conductivities `kappa`.
pub(crate) fn solve_conduction(
    mesh: &TriMesh,
    kappa: &[f64],
    source: f64,
    dirichlet_tag: &str,
    guess: Option<&[f64]>,
) -> Result<HeatState> {
    let mut a = assemble_scalar_diffusion(mesh, kappa)?;
    let load = lumped_mass_diagonal(mesh, &vec![source; mesh.num_nodes()]);
    let mut rhs = load.clone();
    let mut dofs = DofMap::new(mesh.num_nodes(), 1);
    dofs.fix_nodes(&mesh.nodes_with_tag(dirichlet_tag), 0.0)?;
    a.apply_dirichlet(&mut rhs, &dofs);
    let u = solve_from(&a, &rhs, guess, DEFAULT_TOL)?;
    Ok(HeatState {
        objective: load.iter().zip(&u).map(|(f, t)| f * t).sum(),
        temperature: u,
    })
}

/// Solves the steady heat equation for the design `phi`; the objective is
/// `∫ f u` by lumped quadrature.
pub fn solve_heat(
    mesh: &TriMesh,
    phi: &[f64],
    spec: &HeatSpec,
    smoothing: &SmoothingParams,
    guess: Option<&[f64]>,
) -> Result<HeatState> {
    let kappa: Vec<f64> = element_chi(phi, smoothing, mesh)
        .into_iter()
        .map(|c| spec.conductivity(c))
        .collect();
    solve_conduction(mesh, &kappa, spec.source, &spec.dirichlet_tag, guess)
}

/// Per-element `|∇u|²`.
pub(crate) fn gradient_energy(mesh: &TriMesh, u: &[f64]) -> Vec<f64> {
    mesh.elements
        .iter()
        .zip(mesh.geometries())
        .map(|(el, g)| {
            let gr = g.gradient([u[el[0]], u[el[1]], u[el[2]]]);
            gr[0] * gr[0] + gr[1] * gr[1]
        })
        .collect()
}

/// Nodal reaction `(alpha - beta) δ(φ) |∇u|²`.
pub fn heat_sensitivity(
    mesh: &TriMesh,
    phi: &[f64],
    u: &[f64],
    spec: &HeatSpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let contrast = spec.alpha - spec.beta;
    let dens: Vec<f64> = gradient_energy(mesh, u)
        .into_iter()
        .map(|g| contrast * g)
        .collect();
    mesh.element_to_nodal(&dens)
        .into_iter()
        .zip(delta_factor(phi, smoothing))
        .map(|(s, w)| s * w)
        .collect()
}

/// Exact derivative of the discrete heat objective with respect to the
/// nodal level-set values.
pub fn heat_gradient(
    mesh: &TriMesh,
    phi: &[f64],
    u: &[f64],
    spec: &HeatSpec,
    smoothing: &SmoothingParams,
) -> Vec<f64> {
    let contrast = spec.alpha - spec.beta;
    let d: Vec<f64> = gradient_energy(mesh, u)
        .into_iter()
        .zip(mesh.geometries())
        .map(|(g, geo)| -contrast * g * geo.area)
        .collect();
    element_to_phi_gradient(mesh, phi, smoothing, None, &d)
}
