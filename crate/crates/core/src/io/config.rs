use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{benchmark, benchmark_at, BenchmarkName, BenchmarkSetup};
use crate::error::{Error, Result};
use crate::mesh::MeshSpec;
use crate::optimizer::{validate_phases, InitKind, Phase, ProblemSpec, StopRule};

/// A run document: either a named benchmark with optional overrides, or a
/// fully explicit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkName>,
    /// `[nx, ny]`; benchmark mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<Phase>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Field snapshots every this many iterations (0 disables all but the final one).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_snapshot_every() -> usize {
    10
}

impl RunConfig {
    pub fn for_benchmark(name: BenchmarkName) -> Self {
        Self {
            benchmark: Some(name),
            resolution: None,
            mesh: None,
            problem: None,
            phases: None,
            stop: None,
            init: None,
            output_dir: default_output_dir(),
            snapshot_every: default_snapshot_every(),
            record_wall_time: false,
        }
    }

    /// Expands the document into a complete setup and checks every invariant
    /// that can be checked before running.
    pub fn resolve(&self) -> Result<BenchmarkSetup> {
        let mut setup = match self.benchmark {
            Some(name) => {
                for (key, present) in [
                    ("mesh", self.mesh.is_some()),
                    ("problem", self.problem.is_some()),
                ] {
                    if present {
                        return Err(Error::Config(format!(
                            "`{key}` cannot be combined with `benchmark`; use `resolution` or drop `benchmark`"
                        )));
                    }
                }
                match self.resolution {
                    Some([nx, ny]) => benchmark_at(name, nx, ny),
                    None => benchmark(name),
                }
            }
            None => {
                if self.resolution.is_some() {
                    return Err(Error::Config(
                        "`resolution` only applies to benchmarks; set `mesh.nx`/`mesh.ny` instead"
                            .into(),
                    ));
                }
                let missing: Vec<&str> = [
                    ("mesh", self.mesh.is_none()),
                    ("problem", self.problem.is_none()),
                    ("phases", self.phases.is_none()),
                    ("init", self.init.is_none()),
                ]
                .into_iter()
                .filter_map(|(k, m)| m.then_some(k))
                .collect();
                if !missing.is_empty() {
                    return Err(Error::Config(format!(
                        "missing required keys: either `benchmark`, or all of `mesh`, `problem`, `phases`, `init` (missing: {})",
                        missing.join(", ")
                    )));
                }
                BenchmarkSetup {
                    mesh: self.mesh.clone().unwrap(),
                    problem: self.problem.clone().unwrap(),
                    phases: Vec::new(),
                    stop: StopRule::default(),
                    init: InitKind::Full,
                }
            }
        };
        if let Some(phases) = &self.phases {
            setup.phases = phases.clone();
        }
        if let Some(stop) = self.stop {
            setup.stop = stop;
        }
        if let Some(init) = self.init {
            setup.init = init;
        }
        let mesh = setup.mesh.build().map_err(|e| field_err("mesh", e))?;
        setup
            .problem
            .validate(&mesh)
            .map_err(|e| field_err("problem", e))?;
        validate_phases(&setup.phases).map_err(|e| field_err("phases", e))?;
        setup.stop.validate().map_err(|e| field_err("stop", e))?;
        if let InitKind::Perforated { pitch, radius } = setup.init {
            if !(pitch > 0.0) || !(radius >= 0.0) {
                return Err(Error::Config(format!(
                    "init: perforation needs pitch > 0 and radius >= 0, got pitch={pitch} radius={radius}"
                )));
            }
        }
        Ok(setup)
    }
}

fn field_err(field: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{field}: {m}")),
        other => other,
    }
}

/// Parses and validates a TOML run document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_benchmark_document() {
        let cfg = parse_config("benchmark = \"cantilever\"\n").unwrap();
        assert_eq!(cfg, RunConfig::for_benchmark(BenchmarkName::Cantilever));
        assert_eq!(cfg.resolve().unwrap(), benchmark(BenchmarkName::Cantilever));
        assert_eq!(cfg.snapshot_every, 10);
    }

    #[test]
    fn large_time_step_rejected() {
        let doc = r#"
benchmark = "cantilever"
[[phases]]
scheme = "nld"
q = 1.0
tau = 3e-4
dt = 1.5
"#;
        let err = parse_config(doc).unwrap_err().to_string();
        assert!(
            err.contains("phases") && err.contains("0 < dt < 1"),
            "{err}"
        );
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let err = parse_config("").unwrap_err().to_string();
        for key in ["benchmark", "mesh", "problem", "phases", "init"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let err = parse_config("benchmark = \"mbb\"\nbogus = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus") && err.contains("line 2"), "{err}");
        let err = parse_config("benchmark = \"mbb\"\n[stop]\nk_eps = 0.01\nwarm = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("warm"), "{err}");
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let err = parse_config("benchmark = \"mbb\"\n[stop]\nk_eps = -1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("k_eps"), "{err}");
        let err = parse_config("benchmark = \"mbb\"\nresolution = [0, 4]\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("mesh"), "{err}");
    }

    #[test]
    fn benchmark_and_explicit_blocks_are_exclusive() {
        let explicit = to_toml(&explicit_config()).unwrap();
        let doc = format!("benchmark = \"cantilever\"\n{explicit}");
        assert!(parse_config(&doc).is_err());
    }

    fn explicit_config() -> RunConfig {
        let setup = benchmark_at(BenchmarkName::Mechanism, 16, 16);
        RunConfig {
            benchmark: None,
            resolution: None,
            mesh: Some(setup.mesh),
            problem: Some(setup.problem),
            phases: Some(setup.phases),
            stop: Some(setup.stop),
            init: Some(setup.init),
            output_dir: "runs/mech".into(),
            snapshot_every: 5,
            record_wall_time: false,
        }
    }

    #[test]
    fn round_trip_is_idempotent() {
        for cfg in [
            explicit_config(),
            RunConfig::for_benchmark(BenchmarkName::Bridge),
            {
                let mut c = RunConfig::for_benchmark(BenchmarkName::HeatHighAlpha);
                c.resolution = Some([24, 24]);
                c
            },
        ] {
            let text = to_toml(&cfg).unwrap();
            let back = parse_config(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(to_toml(&back).unwrap(), text);
        }
        for name in BenchmarkName::ALL {
            let s = benchmark_at(name, 20, 20);
            let cfg = RunConfig {
                benchmark: None,
                resolution: None,
                mesh: Some(s.mesh.clone()),
                problem: Some(s.problem.clone()),
                phases: Some(s.phases.clone()),
                stop: Some(s.stop),
                init: Some(s.init),
                ..RunConfig::for_benchmark(name)
            };
            let back = parse_config(&to_toml(&cfg).unwrap()).unwrap();
            assert_eq!(back.resolve().unwrap(), s, "{name}");
        }
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let text = std::fs::read_to_string(&path).unwrap();
                parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                seen += 1;
            }
        }
        assert_eq!(seen, BenchmarkName::ALL.len());
    }
}
