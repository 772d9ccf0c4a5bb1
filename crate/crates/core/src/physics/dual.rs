//! Relaxed-density reference optimum for the heat problem.
//!
//! The design variable is a per-element density `θ ∈ [0, 1]` with conductivity
//! `αθ + β(1-θ)`. Projected gradient steps on `θ` with the derivative
//! `-(α-β)|∇u|²` converge to the relaxed optimum, whose objective bounds what
//! any level-set design can reach.

use super::heat::{gradient_energy, solve_conduction, HeatSpec};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone)]
pub struct DualEnergyResult {
    pub objective: f64,
    pub theta: Vec<f64>,
    pub iterations: usize,
}

/// Objective increases tolerated in a row before the oracle gives up.
const DIVERGENCE_RUN: usize = 10;

/// Runs `steps` projected gradient steps of size `k` (largest per-element
/// change in `θ`) under the volume bound `∫θ <= g_max |D|`.
pub fn dual_energy_oracle(
    mesh: &TriMesh,
    spec: &HeatSpec,
    g_max: f64,
    steps: usize,
    k: f64,
) -> Result<DualEnergyResult> {
    if spec.alpha > spec.beta {
        return Err(Error::Oracle(format!(
            "dual energy oracle requires alpha <= beta, got alpha={} beta={}",
            spec.alpha, spec.beta
        )));
    }
    if !(k > 0.0) || !(0.0..=1.0).contains(&g_max) {
        return Err(Error::Oracle(format!(
            "invalid step {k} or volume bound {g_max}"
        )));
    }
    let areas: Vec<f64> = mesh.geometries().iter().map(|g| g.area).collect();
    let budget = g_max * mesh.area();
    let mut theta = project(&vec![g_max; areas.len()], &areas, budget);
    let conductivity = |th: &[f64]| -> Vec<f64> {
        th.iter()
            .map(|t| spec.alpha * t + spec.beta * (1.0 - t))
            .collect()
    };

    let mut state = solve_conduction(
        mesh,
        &conductivity(&theta),
        spec.source,
        &spec.dirichlet_tag,
        None,
    )?;
    let mut best = (state.objective, theta.clone());
    let mut rising = 0;
    let mut iterations = 0;
    for _ in 0..steps {
        let contrast = spec.alpha - spec.beta;
        let grad: Vec<f64> = gradient_energy(mesh, &state.temperature)
            .into_iter()
            .map(|g| -contrast * g)
            .collect();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale == 0.0 {
            break;
        }
        let trial: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| t - k * g / scale)
            .collect();
        let next = project(&trial, &areas, budget);
        let change = next
            .iter()
            .zip(&theta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        theta = next;
        let prev = state.objective;
        state = solve_conduction(
            mesh,
            &conductivity(&theta),
            spec.source,
            &spec.dirichlet_tag,
            Some(&state.temperature),
        )?;
        iterations += 1;
        if state.objective < best.0 {
            best = (state.objective, theta.clone());
        }
        if state.objective > prev {
            rising += 1;
            if rising >= DIVERGENCE_RUN {
                return Err(Error::Oracle(format!(
                    "objective increased for {DIVERGENCE_RUN} consecutive steps"
                )));
            }
        } else {
            rising = 0;
        }
        if change < 1e-12 {
            break;
        }
    }
    Ok(DualEnergyResult {
        objective: best.0,
        theta: best.1,
        iterations,
    })
}

/// Euclidean-in-area projection onto `{0 <= θ <= 1, Σ a θ <= budget}`.
fn project(theta: &[f64], areas: &[f64], budget: f64) -> Vec<f64> {
    let clamp =
        |shift: f64| -> Vec<f64> { theta.iter().map(|t| (t - shift).clamp(0.0, 1.0)).collect() };
    let volume = |th: &[f64]| -> f64 { th.iter().zip(areas).map(|(t, a)| t * a).sum() };
    let plain = clamp(0.0);
    if volume(&plain) <= budget {
        return plain;
    }
    let (mut lo, mut hi) = (0.0, theta.iter().fold(0.0f64, |m, t| m.max(*t)));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if volume(&clamp(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryRegion, Side};

    fn square(n: usize) -> TriMesh {
        let regions: Vec<BoundaryRegion> = [Side::Left, Side::Right, Side::Bottom, Side::Top]
            .into_iter()
            .map(|s| BoundaryRegion::whole_side("cold", s, 1.0, 1.0))
            .collect();
        TriMesh::generate_rect(n, n, 1.0, 1.0, &regions).unwrap()
    }

    #[test]
    fn equal_phases_give_homogeneous_objective() {
        let mesh = square(12);
        let spec = HeatSpec {
            alpha: 0.7,
            beta: 0.7,
            source: 1.0,
            dirichlet_tag: "cold".into(),
        };
        let r = dual_energy_oracle(&mesh, &spec, 0.5, 20, 0.1).unwrap();
        let homog =
            solve_conduction(&mesh, &vec![0.7; mesh.num_elements()], 1.0, "cold", None).unwrap();
        assert!((r.objective - homog.objective).abs() < 1e-10 * homog.objective);
    }

    #[test]
    fn unconstrained_optimum_is_best_phase() {
        let mesh = square(12);
        let spec = HeatSpec {
            alpha: 0.01,
            beta: 1.0,
            source: 1.0,
            dirichlet_tag: "cold".into(),
        };
        let r = dual_energy_oracle(&mesh, &spec, 1.0, 400, 0.2).unwrap();
        let best =
            solve_conduction(&mesh, &vec![1.0; mesh.num_elements()], 1.0, "cold", None).unwrap();
        let start =
            solve_conduction(&mesh, &vec![0.01; mesh.num_elements()], 1.0, "cold", None).unwrap();
        // starts fully conductive-poor, ends within 1% of the all-beta design
        assert!(start.objective > 10.0 * best.objective);
        assert!(
            (r.objective - best.objective).abs() < 1e-2 * best.objective,
            "{} vs {}",
            r.objective,
            best.objective
        );
    }

    #[test]
    fn wrong_ordering_rejected() {
        let mesh = square(4);
        let spec = HeatSpec {
            alpha: 1.0,
            beta: 0.01,
            source: 1.0,
            dirichlet_tag: "cold".into(),
        };
        assert!(dual_energy_oracle(&mesh, &spec, 0.5, 10, 0.1).is_err());
    }

    #[test]
    fn projection_respects_budget() {
        let areas = vec![1.0, 2.0, 1.0];
        let p = project(&[0.9, 1.4, -0.2], &areas, 1.5);
        assert!(p.iter().all(|t| (0.0..=1.0).contains(t)));
        let v: f64 = p.iter().zip(&areas).map(|(t, a)| t * a).sum();
        assert!((v - 1.5).abs() < 1e-9);
    }
}
