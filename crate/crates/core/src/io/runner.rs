use std::path::Path;

use crate::benchmarks::BenchmarkSetup;
use crate::error::{config_err, Result};
use crate::optimizer::{initial_lsf, run_with, RunOptions, RunOutcome, StopReason};
use crate::physics::volume_fraction;

use super::output::DirectorySink;

/// What the CLI reports about a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reason: StopReason,
    pub objective: f64,
    pub constraint: f64,
    pub volume_fraction: f64,
    pub steps: usize,
    pub outcome: RunOutcome,
}

/// Runs a resolved setup, writing history and snapshots into `out_dir`.
pub fn run_setup(
    setup: &BenchmarkSetup,
    out_dir: &Path,
    snapshot_every: usize,
    record_wall_time: bool,
) -> Result<RunSummary> {
    let mesh = setup.build_mesh()?;
    let phi0 = initial_lsf(setup.init, &mesh);
    let mut sink = DirectorySink::create(out_dir, &mesh, setup.problem.smoothing, snapshot_every)?;
    let outcome = run_with(
        &mesh,
        &setup.problem,
        &phi0,
        &setup.phases,
        &setup.stop,
        &mut sink,
        RunOptions { record_wall_time },
    )?;
    let last = outcome.history.last().copied();
    Ok(RunSummary {
        reason: outcome.reason.clone(),
        objective: last.map_or(f64::NAN, |r| r.objective),
        constraint: last.map_or(f64::NAN, |r| r.constraint),
        volume_fraction: volume_fraction(&mesh, outcome.phi.values(), &setup.problem.smoothing),
        steps: outcome.iterations(),
        outcome,
    })
}

/// One sweep dimension, e.g. `q=1,2,4`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<f64>,
}

const GRID_KEYS: [&str; 4] = ["q", "dt", "tau", "rho"];

/// Parses `key=v1,v2;key=v3` into axes.
pub fn parse_grid(text: &str) -> Result<Vec<GridAxis>> {
    let mut axes: Vec<GridAxis> = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((key, vals)) = part.split_once('=') else {
            return config_err(format!("grid entry `{part}` must look like key=v1,v2"));
        };
        let key = key.trim();
        if !GRID_KEYS.contains(&key) {
            return config_err(format!(
                "grid key `{key}` not one of {}",
                GRID_KEYS.join(", ")
            ));
        }
        if axes.iter().any(|a| a.key == key) {
            return config_err(format!("grid key `{key}` given twice"));
        }
        let values = vals
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    crate::Error::Config(format!("grid value `{v}` for `{key}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        axes.push(GridAxis {
            key: key.to_string(),
            values,
        });
    }
    if axes.is_empty() {
        return config_err("empty grid");
    }
    Ok(axes)
}

/// All grid points as `(directory name, setup)` in a fixed order.
pub fn apply_grid(
    base: &BenchmarkSetup,
    axes: &[GridAxis],
) -> Result<Vec<(String, BenchmarkSetup)>> {
    let mut points = vec![(String::new(), base.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for (name, setup) in &points {
            for &v in &axis.values {
                let mut s = setup.clone();
                for ph in &mut s.phases {
                    let slot = match axis.key.as_str() {
                        "q" => &mut ph.params.q,
                        "dt" => &mut ph.params.dt,
                        "tau" => &mut ph.params.tau,
                        _ => &mut ph.params.rho,
                    };
                    *slot = v;
                    ph.params.validate()?;
                }
                let label = format!("{}{v}", axis.key);
                let name = if name.is_empty() {
                    label
                } else {
                    format!("{name}_{label}")
                };
                next.push((name, s));
            }
        }
        points = next;
    }
    Ok(points)
}
