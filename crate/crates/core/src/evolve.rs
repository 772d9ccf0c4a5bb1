//! One time step of the level-set evolution equations.
//!
//! Each scheme lags its nonlinear coefficients at step `n`, so a step is a
//! single symmetric positive-definite linear solve:
//!
//! * `nld`:  `[M_w/Δt + τK] φ⁺ = M_w φ/Δt + ρ M r`
//! * `nnld`: adds an inertial history term and the damping `3h/(n+ξ)`
//! * `dnld`: replaces `K` by a stiffness with per-element diffusivity `V_n`
//!   blended from `|∇φ_n|^(p-2)`
//!
//! where `M_w` is the lumped mass weighted by `q̃(|φ_n|+ξ)^(q-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::fem::{
    assemble_scalar_diffusion, lumped_mass_diagonal, solve, DofMap, SparseSystem, DEFAULT_TOL,
};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Nld,
    Nnld,
    Dnld,
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nld" => Ok(Self::Nld),
            "nnld" => Ok(Self::Nnld),
            "dnld" => Ok(Self::Dnld),
            other => config_err(format!(
                "unknown scheme `{other}` (expected nld, nnld or dnld)"
            )),
        }
    }
}

/// Coefficient in front of the time-derivative weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QTilde {
    One,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub scheme: Scheme,
    pub q: f64,
    #[serde(default = "EvolveParams::default_q_tilde")]
    pub q_tilde: QTilde,
    pub tau: f64,
    #[serde(default = "EvolveParams::default_rho")]
    pub rho: f64,
    pub dt: f64,
    #[serde(default = "EvolveParams::default_xi")]
    pub xi: f64,
    /// p-Laplacian exponent (`dnld`).
    #[serde(default = "EvolveParams::default_p")]
    pub p: f64,
    /// Diffusivity memory (`dnld`).
    #[serde(default = "EvolveParams::default_gamma")]
    pub gamma: f64,
    /// Inertia switch, 0 or 1 (`nnld`).
    #[serde(default = "EvolveParams::default_h")]
    pub h: u8,
}

impl EvolveParams {
    pub(crate) fn default_q_tilde() -> QTilde {
        QTilde::One
    }
    pub(crate) fn default_rho() -> f64 {
        0.7
    }
    pub(crate) fn default_xi() -> f64 {
        1e-4
    }
    pub(crate) fn default_p() -> f64 {
        6.0
    }
    pub(crate) fn default_gamma() -> f64 {
        0.1
    }
    pub(crate) fn default_h() -> u8 {
        1
    }

    /// Plain nonlinear diffusion with default constants.
    pub fn nld(q: f64, tau: f64, dt: f64) -> Self {
        Self {
            scheme: Scheme::Nld,
            q,
            q_tilde: Self::default_q_tilde(),
            tau,
            rho: Self::default_rho(),
            dt,
            xi: Self::default_xi(),
            p: Self::default_p(),
            gamma: Self::default_gamma(),
            h: Self::default_h(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) {
            return config_err(format!("q must be positive, got {}", self.q));
        }
        if !(self.tau >= 0.0) {
            return config_err(format!("tau must be nonnegative, got {}", self.tau));
        }
        if !(self.rho >= 0.0) {
            return config_err(format!("rho must be nonnegative, got {}", self.rho));
        }
        if !(self.dt > 0.0 && self.dt < 1.0) {
            return config_err(format!(
                "dt must satisfy 0 < dt < 1 (larger steps make the shape oscillate), got {}",
                self.dt
            ));
        }
        if !(self.xi > 0.0) {
            return config_err(format!("xi must be positive, got {}", self.xi));
        }
        if self.scheme == Scheme::Dnld {
            if !(self.p > 1.0) {
                return config_err(format!("p must exceed 1, got {}", self.p));
            }
            if !(0.0..1.0).contains(&self.gamma) {
                return config_err(format!("gamma must lie in [0, 1), got {}", self.gamma));
            }
        }
        if self.h > 1 {
            return config_err(format!("h must be 0 or 1, got {}", self.h));
        }
        Ok(())
    }

    fn q_tilde_value(&self) -> f64 {
        match self.q_tilde {
            QTilde::One => 1.0,
            QTilde::Q => self.q,
        }
    }

    /// Nodal weight `q̃(|φ|+ξ)^(q-1)` of the time derivative.
    pub fn time_weight(&self, phi: &[f64]) -> Vec<f64> {
        let qt = self.q_tilde_value();
        phi.iter()
            .map(|p| qt * (p.abs() + self.xi).powf(self.q - 1.0))
            .collect()
    }
}

/// Prescribed level-set values on the domain boundary.
#[derive(Debug, Clone)]
pub struct EvolutionBc {
    dofs: DofMap,
}

impl EvolutionBc {
    /// `φ = 0` on every boundary node.
    pub fn homogeneous(mesh: &TriMesh) -> Self {
        Self::with_material_tags(mesh, &[]).expect("boundary nodes are in range")
    }

    /// `φ = 0` on the boundary except nodes on edges tagged in `material_tags`,
    /// which are held at `φ = 1`.
    pub fn with_material_tags(mesh: &TriMesh, material_tags: &[String]) -> Result<Self> {
        let mut dofs = DofMap::new(mesh.num_nodes(), 1);
        dofs.fix_nodes(&mesh.boundary_nodes(), 0.0)?;
        for tag in material_tags {
            if !mesh.has_tag(tag) {
                return config_err(format!("material tag `{tag}` matches no boundary edges"));
            }
            dofs.fix_nodes(&mesh.nodes_with_tag(tag), 1.0)?;
        }
        Ok(Self { dofs })
    }

    pub fn fixed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.dofs.dirichlet.iter().map(|(&k, &v)| (k, v))
    }

    /// Overwrites the prescribed entries of `phi`.
    pub fn impose(&self, phi: &mut [f64]) {
        for (n, v) in self.fixed() {
            phi[n] = v;
        }
    }
}

/// History carried between steps.
#[derive(Debug, Clone, Default)]
pub struct EvolveState {
    /// Previous level set (`nnld`).
    pub phi_prev: Option<Vec<f64>>,
    /// Per-element diffusivity memory (`dnld`).
    pub v_prev: Option<Vec<f64>>,
    /// Index of the next step.
    pub step: usize,
}

/// Linear system of one step before boundary conditions.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: SparseSystem,
    pub rhs: Vec<f64>,
}

fn reaction_load(mesh: &TriMesh, reaction: &[f64], rho: f64) -> Vec<f64> {
    lumped_mass_diagonal(mesh, reaction)
        .into_iter()
        .map(|v| rho * v)
        .collect()
}

fn stiffness(mesh: &TriMesh, tau: f64, coeff: Option<&[f64]>) -> Result<SparseSystem> {
    let ones;
    let c = match coeff {
        Some(c) => c,
        None => {
            ones = vec![1.0; mesh.num_elements()];
            &ones
        }
    };
    Ok(assemble_scalar_diffusion(mesh, c)?.scaled(tau))
}

pub fn nld_system(
    mesh: &TriMesh,
    phi_n: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
) -> Result<StepSystem> {
    let mw = lumped_mass_diagonal(mesh, &params.time_weight(phi_n));
    let diag: Vec<f64> = mw.iter().map(|m| m / params.dt).collect();
    let matrix = stiffness(mesh, params.tau, None)?.add_diagonal(&diag);
    let rhs = diag
        .iter()
        .zip(phi_n)
        .zip(reaction_load(mesh, reaction, params.rho))
        .map(|((d, p), r)| d * p + r)
        .collect();
    Ok(StepSystem { matrix, rhs })
}

pub fn nnld_system(
    mesh: &TriMesh,
    phi_n: &[f64],
    phi_prev: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
    n: usize,
) -> Result<StepSystem> {
    let h = f64::from(params.h);
    let damping = 3.0 * h / (n as f64 + params.xi);
    let mw = lumped_mass_diagonal(mesh, &params.time_weight(phi_n));
    let base: Vec<f64> = mw.iter().map(|m| m / params.dt).collect();
    let diag: Vec<f64> = base.iter().map(|b| (1.0 + damping) * b).collect();
    let matrix = stiffness(mesh, params.tau, None)?.add_diagonal(&diag);
    let rhs = base
        .iter()
        .zip(phi_n.iter().zip(phi_prev))
        .zip(reaction_load(mesh, reaction, params.rho))
        .map(|((b, (p, pp)), r)| b * ((1.0 + h) * p - h * pp) + damping * b * p + r)
        .collect();
    Ok(StepSystem { matrix, rhs })
}

/// Blended p-Laplacian diffusivity per element, clamped below at `ξ`.
pub fn dnld_diffusivity(
    mesh: &TriMesh,
    phi_n: &[f64],
    v_prev: &[f64],
    params: &EvolveParams,
) -> Vec<f64> {
    mesh.elements
        .iter()
        .zip(mesh.geometries())
        .zip(v_prev)
        .map(|((el, g), vp)| {
            let gr = g.gradient([phi_n[el[0]], phi_n[el[1]], phi_n[el[2]]]);
            let norm = (gr[0] * gr[0] + gr[1] * gr[1]).sqrt();
            // singular branch p < 2 would blow up on flat elements
            let norm = if params.p < 2.0 {
                norm.max(params.xi)
            } else {
                norm
            };
            let fresh = norm.powf(params.p - 2.0);
            (params.gamma * vp + (1.0 - params.gamma) * fresh).max(params.xi)
        })
        .collect()
}

/// Initial diffusivity memory from the initial level set, clamped below at `ξ`.
pub fn dnld_initial_diffusivity(mesh: &TriMesh, phi0: &[f64], params: &EvolveParams) -> Vec<f64> {
    mesh.element_means(phi0)
        .into_iter()
        .map(|v| v.max(params.xi))
        .collect()
}

pub fn dnld_system(
    mesh: &TriMesh,
    phi_n: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
    v_n: &[f64],
) -> Result<StepSystem> {
    let mw = lumped_mass_diagonal(mesh, &params.time_weight(phi_n));
    let diag: Vec<f64> = mw.iter().map(|m| m / params.dt).collect();
    let matrix = if params.tau > 0.0 {
        stiffness(mesh, params.tau, Some(v_n))?.add_diagonal(&diag)
    } else {
        SparseSystem::from_diagonal(&diag)
    };
    let rhs = diag
        .iter()
        .zip(phi_n)
        .zip(reaction_load(mesh, reaction, params.rho))
        .map(|((d, p), r)| d * p + r)
        .collect();
    Ok(StepSystem { matrix, rhs })
}

fn solve_step(system: StepSystem, bc: &EvolutionBc) -> Result<Vec<f64>> {
    let StepSystem {
        mut matrix,
        mut rhs,
    } = system;
    matrix.apply_dirichlet(&mut rhs, &bc.dofs);
    solve(&matrix, &rhs, DEFAULT_TOL)
}

/// Nonlinear diffusion step; returns the unclipped next level set.
pub fn step_nld(
    mesh: &TriMesh,
    phi_n: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
    bc: &EvolutionBc,
) -> Result<Vec<f64>> {
    solve_step(nld_system(mesh, phi_n, reaction, params)?, bc)
}

/// Accelerated (inertial) step; `n` is the global step index.
pub fn step_nnld(
    mesh: &TriMesh,
    phi_n: &[f64],
    phi_prev: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
    n: usize,
    bc: &EvolutionBc,
) -> Result<Vec<f64>> {
    solve_step(nnld_system(mesh, phi_n, phi_prev, reaction, params, n)?, bc)
}

/// Doubly nonlinear step; returns the unclipped level set and the new diffusivity memory.
pub fn step_dnld(
    mesh: &TriMesh,
    phi_n: &[f64],
    reaction: &[f64],
    params: &EvolveParams,
    v_prev: &[f64],
    bc: &EvolutionBc,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let v_n = dnld_diffusivity(mesh, phi_n, v_prev, params);
    let next = solve_step(dnld_system(mesh, phi_n, reaction, params, &v_n)?, bc)?;
    Ok((next, v_n))
}

impl EvolveState {
    /// Advances `phi_n` by one step of `params.scheme`, updating the history.
    ///
    /// The first accelerated step is an `nld` step, which seeds the inertial
    /// history; `dnld` seeds its memory from the first level set it sees.
    pub fn advance(
        &mut self,
        mesh: &TriMesh,
        phi_n: &[f64],
        reaction: &[f64],
        params: &EvolveParams,
        bc: &EvolutionBc,
    ) -> Result<Vec<f64>> {
        let next = match params.scheme {
            Scheme::Nld => step_nld(mesh, phi_n, reaction, params, bc)?,
            Scheme::Nnld => match self.phi_prev.as_deref() {
                Some(prev) if self.step > 0 => {
                    step_nnld(mesh, phi_n, prev, reaction, params, self.step, bc)?
                }
                _ => step_nld(mesh, phi_n, reaction, params, bc)?,
            },
            Scheme::Dnld => {
                let v_prev = match self.v_prev.take() {
                    Some(v) => v,
                    None => dnld_initial_diffusivity(mesh, phi_n, params),
                };
                let (next, v_n) = step_dnld(mesh, phi_n, reaction, params, &v_prev, bc)?;
                self.v_prev = Some(v_n);
                next
            }
        };
        self.phi_prev = Some(phi_n.to_vec());
        self.step += 1;
        Ok(next)
    }
}
