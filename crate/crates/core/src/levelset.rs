//! Level-set fields, the smoothed characteristic function, and delta weights.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::mesh::TriMesh;

/// Nodal level-set values, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField(Vec<f64>);

impl LevelSetField {
    /// Clips raw values into `[-1, 1]`: anything outside the band is replaced by its sign.
    pub fn clip(raw: &[f64]) -> Self {
        Self(raw.iter().map(|&v| clip_value(v)).collect())
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![clip_value(value); n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LevelSetField {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn clip_value(v: f64) -> f64 {
    if v.abs() > 1.0 {
        v.signum()
    } else {
        v
    }
}

/// How the approximate delta function weights the sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Weight 1 everywhere, so the void also receives sensitivity.
    #[default]
    Uniform,
    /// `1/eta` on `[0 <= phi <= eta]`, 0 elsewhere.
    Indicator,
}

impl std::str::FromStr for DeltaMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "indicator" => Ok(Self::Indicator),
            other => config_err(format!(
                "unknown delta mode `{other}` (expected uniform or indicator)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingParams {
    /// Half-width of the smoothed transition.
    pub delta: f64,
    /// Width of the indicator delta function.
    pub eta: f64,
    /// Lower bound on the element material fraction used in state solves.
    pub chi_floor: f64,
    pub delta_mode: DeltaMode,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            delta: 0.8,
            eta: 1.0,
            chi_floor: 1e-3,
            delta_mode: DeltaMode::Uniform,
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return config_err(format!(
                "smoothing.delta must be positive, got {}",
                self.delta
            ));
        }
        if !(self.eta > 0.0) {
            return config_err(format!("smoothing.eta must be positive, got {}", self.eta));
        }
        if !(self.chi_floor > 0.0 && self.chi_floor < 1.0) {
            return config_err(format!(
                "smoothing.chi_floor must lie in (0, 1), got {}",
                self.chi_floor
            ));
        }
        Ok(())
    }
}

/// Quintic smoothed Heaviside of half-width `delta`.
pub fn smoothed_chi_value(phi: f64, delta: f64) -> f64 {
    if phi >= delta {
        1.0
    } else if phi <= -delta {
        0.0
    } else {
        let s = phi / delta;
        let s2 = s * s;
        0.5 + s * (15.0 / 16.0 - s2 * (5.0 / 8.0 - s2 * 3.0 / 16.0))
    }
}

/// Derivative of [`smoothed_chi_value`] with respect to `phi`.
pub fn smoothed_chi_derivative(phi: f64, delta: f64) -> f64 {
    if phi.abs() >= delta {
        0.0
    } else {
        let s = phi / delta;
        let d = 1.0 - s * s;
        15.0 / 16.0 * d * d / delta
    }
}

pub fn smoothed_chi(phi: &[f64], params: &SmoothingParams) -> Vec<f64> {
    phi.iter()
        .map(|&p| smoothed_chi_value(p, params.delta))
        .collect()
}

/// Unclamped per-element material fraction: mean of the nodal smoothed values.
pub fn element_chi(phi: &[f64], params: &SmoothingParams, mesh: &TriMesh) -> Vec<f64> {
    mesh.element_means(&smoothed_chi(phi, params))
}

/// Per-element material fraction for stiffness use, clamped below by `chi_floor`.
pub fn element_material(phi: &[f64], params: &SmoothingParams, mesh: &TriMesh) -> Vec<f64> {
    element_chi(phi, params, mesh)
        .into_iter()
        .map(|c| c.max(params.chi_floor))
        .collect()
}

/// Pulls a derivative with respect to the per-element material fraction
/// back to the nodal level-set values. Elements sitting on the lower clamp
/// (`floor`, if given) contribute nothing.
pub fn element_to_phi_gradient(
    mesh: &TriMesh,
    phi: &[f64],
    params: &SmoothingParams,
    floor: Option<f64>,
    d_material: &[f64],
) -> Vec<f64> {
    let chi = element_chi(phi, params, mesh);
    let mut grad = vec![0.0; phi.len()];
    for ((el, &c), &d) in mesh.elements.iter().zip(&chi).zip(d_material) {
        if floor.is_some_and(|f| c < f) {
            continue;
        }
        for &n in el {
            grad[n] += d * smoothed_chi_derivative(phi[n], params.delta) / 3.0;
        }
    }
    grad
}

/// Nodal weight of the approximate delta function.
pub fn delta_factor(phi: &[f64], params: &SmoothingParams) -> Vec<f64> {
    match params.delta_mode {
        DeltaMode::Uniform => vec![1.0; phi.len()],
        DeltaMode::Indicator => phi
            .iter()
            .map(|&p| {
                if (0.0..=params.eta).contains(&p) {
                    1.0 / params.eta
                } else {
                    0.0
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let f = LevelSetField::clip(&[1.5, -2.0, 0.3, 1.0, -1.0]);
        assert_eq!(f.values(), &[1.0, -1.0, 0.3, 1.0, -1.0]);
    }

    #[test]
    fn quintic_values() {
        let d = 0.8;
        assert_eq!(smoothed_chi_value(0.0, d), 0.5);
        assert!((smoothed_chi_value(d, d) - 1.0).abs() < 1e-15);
        assert!(smoothed_chi_value(-d, d).abs() < 1e-15);
        // 1/2 + 15/32 - 5/64 + 3/512, exact in binary
        assert_eq!(smoothed_chi_value(d / 2.0, d), 0.896484375);
        // polynomial continuity at the band edge
        let s: f64 = 1.0;
        let poly = 0.5 + 15.0 / 16.0 * s - 5.0 / 8.0 * s.powi(3) + 3.0 / 16.0 * s.powi(5);
        assert!((poly - 1.0).abs() < 1e-15);
    }

    #[test]
    fn element_material_examples() {
        let mesh = TriMesh::generate_rect(1, 1, 1.0, 1.0, &[]).unwrap();
        let p = SmoothingParams::default();
        assert!(element_material(&[1.0; 4], &p, &mesh)
            .iter()
            .all(|&c| c == 1.0));
        assert!(element_material(&[-1.0; 4], &p, &mesh)
            .iter()
            .all(|&c| c == p.chi_floor));
        // element 0 is nodes (0, 1, 2): chi = (0, 0.5, 1)
        let chi = element_material(&[-1.0, 0.0, 1.0, 1.0], &p, &mesh);
        assert!((chi[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn delta_factor_modes() {
        let mut p = SmoothingParams::default();
        assert_eq!(delta_factor(&[-0.9, 0.0, 0.7], &p), vec![1.0; 3]);
        p.delta_mode = DeltaMode::Indicator;
        assert_eq!(delta_factor(&[0.5, -0.5, 1.0], &p), vec![1.0, 0.0, 1.0]);
        assert!("bogus".parse::<DeltaMode>().is_err());
        assert_eq!(
            "indicator".parse::<DeltaMode>().unwrap(),
            DeltaMode::Indicator
        );
    }

    #[test]
    fn params_validation() {
        assert!(SmoothingParams::default().validate().is_ok());
        let bad = SmoothingParams {
            chi_floor: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SmoothingParams {
            delta: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn derivative_vanishes_at_band_edges() {
        let d = 0.8;
        for x in [d, -d] {
            let h = 1e-6;
            let fd = (smoothed_chi_value(x + h, d) - smoothed_chi_value(x - h, d)) / (2.0 * h);
            assert!(fd.abs() < 1e-6);
            assert_eq!(smoothed_chi_derivative(x, d), 0.0);
        }
    }

    proptest! {
        #[test]
        fn odd_symmetry(phi in -0.8f64..0.8) {
            let d = 0.8;
            prop_assert!((smoothed_chi_value(phi, d) + smoothed_chi_value(-phi, d) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn clip_idempotent(raw in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
            let once = LevelSetField::clip(&raw);
            let twice = LevelSetField::clip(once.values());
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.values().iter().all(|v| v.abs() <= 1.0));
        }

        #[test]
        fn monotone_with_matching_derivative(phi in -1.2f64..1.2) {
            let d = 0.8;
            let h = 1e-6;
            let fd = (smoothed_chi_value(phi + h, d) - smoothed_chi_value(phi - h, d)) / (2.0 * h);
            prop_assert!(fd >= -1e-9);
            prop_assert!((fd - smoothed_chi_derivative(phi, d)).abs() < 1e-5);
        }
    }
}
