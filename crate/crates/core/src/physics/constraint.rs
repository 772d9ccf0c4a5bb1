use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::levelset::{smoothed_chi, SmoothingParams};
use crate::mesh::TriMesh;

/// Volume bound and augmented-Lagrangian multiplier state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintState {
    /// Admissible material fraction of the domain.
    pub g_max: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Multiplier step per unit relative constraint violation.
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_mu() -> f64 {
    5.0
}

impl ConstraintState {
    pub fn new(g_max: f64) -> Self {
        Self {
            g_max,
            lambda: 0.0,
            mu: default_mu(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_max > 0.0 && self.g_max < 1.0) {
            return config_err(format!("g_max must lie in (0, 1), got {}", self.g_max));
        }
        if !(self.lambda >= 0.0) {
            return config_err(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.mu > 0.0) {
            return config_err(format!("mu must be positive, got {}", self.mu));
        }
        Ok(())
    }
}

/// `∫ χ(φ) dx - g_max |D|`, integrated with the lumped mass.
pub fn volume_constraint(
    mesh: &TriMesh,
    phi: &[f64],
    smoothing: &SmoothingParams,
    g_max: f64,
) -> f64 {
    mesh.integrate(&smoothed_chi(phi, smoothing)) - g_max * mesh.area()
}

/// Fraction of the domain occupied by material.
pub fn volume_fraction(mesh: &TriMesh, phi: &[f64], smoothing: &SmoothingParams) -> f64 {
    mesh.integrate(&smoothed_chi(phi, smoothing)) / mesh.area()
}

#[derive(Debug, Clone)]
pub struct Combined {
    pub reaction: Vec<f64>,
    pub lambda: f64,
    /// Set when the sensitivity vanished identically and could not be normalized.
    pub degenerate: bool,
}

/// Normalizes `raw` to unit mean absolute value, advances the multiplier with
/// the constraint value `g`, and returns the reaction `s̄ - λ`.
pub fn multiplier_combine(
    raw: &[f64],
    constraint: &mut ConstraintState,
    g: f64,
    mesh: &TriMesh,
) -> Combined {
    let area = mesh.area();
    let mean_abs = mesh.integrate(&raw.iter().map(|v| v.abs()).collect::<Vec<_>>()) / area;
    let degenerate = !(mean_abs > 0.0) || !mean_abs.is_finite();
    constraint.lambda = (constraint.lambda + constraint.mu * g / area).max(0.0);
    let lambda = constraint.lambda;
    let reaction = if degenerate {
        vec![-lambda; raw.len()]
    } else {
        raw.iter().map(|v| v / mean_abs - lambda).collect()
    };
    Combined {
        reaction,
        lambda,
        degenerate,
    }
}
