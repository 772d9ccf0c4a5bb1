//! The five standard test problems (heat in two contrast orderings) with
//! their parameter tuples. Load patch sizes and port positions are estimates
//! of the usual textbook layouts; all of them can be overridden through an
//! explicit configuration.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::evolve::EvolveParams;
use crate::levelset::{DeltaMode, SmoothingParams};
use crate::mesh::{BoundaryRegion, MeshSpec, Side, TriMesh};
use crate::optimizer::{InitKind, Phase, Physics, ProblemSpec, StopRule};
use crate::physics::{ConstraintState, ElasticitySpec, HeatSpec, OutputPort};

pub const YOUNG: f64 = 2.1e11;
pub const POISSON: f64 = 0.3;
pub const LOAD: [f64; 2] = [0.0, -1.0e3];

/// Spring stiffness per unit boundary length on the mechanism ports, as a
/// fraction of the Young modulus.
pub const MECHANISM_SPRING_RATIO: f64 = 0.1;

/// Material floor for the mechanism. Thin hinges make the stiffness contrast
/// extreme; a higher floor keeps the uniformly weighted reaction from
/// chattering around them.
pub const MECHANISM_CHI_FLOOR: f64 = 1e-2;

/// Multiplier step for the mechanism; the default overshoots on the first
/// steps and collapses the design.
pub const MECHANISM_MU: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkName {
    Cantilever,
    Mbb,
    Bridge,
    Mechanism,
    HeatLowAlpha,
    HeatHighAlpha,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 6] = [
        BenchmarkName::Cantilever,
        BenchmarkName::Mbb,
        BenchmarkName::Bridge,
        BenchmarkName::Mechanism,
        BenchmarkName::HeatLowAlpha,
        BenchmarkName::HeatHighAlpha,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkName::Cantilever => "cantilever",
            BenchmarkName::Mbb => "mbb",
            BenchmarkName::Bridge => "bridge",
            BenchmarkName::Mechanism => "mechanism",
            BenchmarkName::HeatLowAlpha => "heat_low_alpha",
            BenchmarkName::HeatHighAlpha => "heat_high_alpha",
        }
    }

    /// Default `(nx, ny)`.
    pub fn default_resolution(&self) -> (usize, usize) {
        match self {
            BenchmarkName::Cantilever | BenchmarkName::Mbb | BenchmarkName::Bridge => (80, 40),
            _ => (64, 64),
        }
    }

    /// `(τ, G_max, Δt)`.
    pub fn parameters(&self) -> (f64, f64, f64) {
        match self {
            BenchmarkName::Cantilever => (3e-4, 0.45, 0.7),
            BenchmarkName::Mbb => (6e-5, 0.4, 0.3),
            BenchmarkName::Bridge => (1e-4, 0.35, 0.5),
            BenchmarkName::Mechanism => (1.5e-4, 0.4, 0.2),
            BenchmarkName::HeatLowAlpha => (1e-5, 0.5, 0.5),
            BenchmarkName::HeatHighAlpha => (1e-4, 0.4, 0.4),
        }
    }
}

impl std::fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BenchmarkName {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|b| b.as_str() == s).map_or_else(
            || {
                let names: Vec<_> = Self::ALL.iter().map(|b| b.as_str()).collect();
                config_err(format!(
                    "unknown benchmark `{s}` (expected one of {})",
                    names.join(", ")
                ))
            },
            Ok,
        )
    }
}

/// Everything a run needs, before the mesh is built.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSetup {
    pub mesh: MeshSpec,
    pub problem: ProblemSpec,
    pub phases: Vec<Phase>,
    pub stop: StopRule,
    pub init: InitKind,
}

impl BenchmarkSetup {
    pub fn build_mesh(&self) -> Result<TriMesh> {
        self.mesh.build()
    }

    /// Replaces `q` in every phase.
    pub fn with_q(mut self, q: f64) -> Self {
        for ph in &mut self.phases {
            ph.params.q = q;
        }
        self
    }
}

pub fn benchmark(name: BenchmarkName) -> BenchmarkSetup {
    let (nx, ny) = name.default_resolution();
    benchmark_at(name, nx, ny)
}

/// The benchmark on an `nx × ny` mesh.
pub fn benchmark_at(name: BenchmarkName, nx: usize, ny: usize) -> BenchmarkSetup {
    let (tau, g_max, dt) = name.parameters();
    let phases = vec![Phase::unbounded(EvolveParams::nld(1.0, tau, dt))];
    let mut constraint = ConstraintState::new(g_max);
    // The indicator delta concentrates the reaction on the material side of
    // the interface, which gives crisp designs; the mechanism objective
    // changes sign across the domain and settles only with uniform weights.
    let smoothing = match name {
        BenchmarkName::Mechanism => {
            constraint.mu = MECHANISM_MU;
            SmoothingParams {
                chi_floor: MECHANISM_CHI_FLOOR,
                ..SmoothingParams::default()
            }
        }
        _ => SmoothingParams {
            delta_mode: DeltaMode::Indicator,
            ..SmoothingParams::default()
        },
    };
    let compliance = |dirichlet: &str, load: &str| {
        Physics::Compliance(ElasticitySpec {
            young: YOUNG,
            nu: POISSON,
            dirichlet_tag: dirichlet.into(),
            traction_tag: load.into(),
            traction: LOAD,
            input_spring: [[0.0; 2]; 2],
            outputs: vec![],
        })
    };
    let (width, height, regions, physics, material_tags, init) = match name {
        BenchmarkName::Cantilever => (
            2.0,
            1.0,
            vec![
                BoundaryRegion::whole_side("fixed", Side::Left, 2.0, 1.0),
                BoundaryRegion::new("load", Side::Right, 0.45, 0.55),
            ],
            compliance("fixed", "load"),
            vec!["fixed".to_string(), "load".to_string()],
            InitKind::Full,
        ),
        // Full beam on two small corner supports, loaded at the top centre.
        BenchmarkName::Mbb => (
            2.0,
            1.0,
            vec![
                BoundaryRegion::new("support", Side::Bottom, 0.0, 0.05),
                BoundaryRegion::new("support", Side::Bottom, 1.95, 2.0),
                BoundaryRegion::new("load", Side::Top, 0.95, 1.05),
            ],
            compliance("support", "load"),
            vec!["support".to_string(), "load".to_string()],
            InitKind::Full,
        ),
        // Deck loaded along the bottom edge between two corner supports.
        BenchmarkName::Bridge => (
            2.0,
            1.0,
            vec![
                BoundaryRegion::new("support", Side::Bottom, 0.0, 0.1),
                BoundaryRegion::new("deck", Side::Bottom, 0.1, 1.9),
                BoundaryRegion::new("support", Side::Bottom, 1.9, 2.0),
            ],
            compliance("support", "deck"),
            vec!["support".to_string(), "deck".to_string()],
            InitKind::Perforated {
                pitch: 0.25,
                radius: 0.07,
            },
        ),
        // Gripper: pushed at mid-height on the left, jaws close on the right.
        BenchmarkName::Mechanism => {
            let k = -MECHANISM_SPRING_RATIO * YOUNG;
            let spring = [[k, 0.0], [0.0, k]];
            (
                1.0,
                1.0,
                vec![
                    BoundaryRegion::new("fixed", Side::Left, 0.0, 0.1),
                    BoundaryRegion::new("input", Side::Left, 0.45, 0.55),
                    BoundaryRegion::new("fixed", Side::Left, 0.9, 1.0),
                    BoundaryRegion::new("jaw_lower", Side::Right, 0.3, 0.4),
                    BoundaryRegion::new("jaw_upper", Side::Right, 0.6, 0.7),
                ],
                Physics::Mechanism(ElasticitySpec {
                    young: YOUNG,
                    nu: POISSON,
                    dirichlet_tag: "fixed".into(),
                    traction_tag: "input".into(),
                    traction: [1.0, 0.0],
                    input_spring: spring,
                    outputs: vec![
                        OutputPort {
                            tag: "jaw_upper".into(),
                            traction: [0.0, -1.0],
                            spring,
                        },
                        OutputPort {
                            tag: "jaw_lower".into(),
                            traction: [0.0, 1.0],
                            spring,
                        },
                    ],
                }),
                vec![
                    "fixed".to_string(),
                    "input".to_string(),
                    "jaw_upper".to_string(),
                    "jaw_lower".to_string(),
                ],
                InitKind::Full,
            )
        }
        BenchmarkName::HeatLowAlpha => (
            1.0,
            1.0,
            [Side::Left, Side::Right, Side::Bottom, Side::Top]
                .into_iter()
                .map(|s| BoundaryRegion::whole_side("sink", s, 1.0, 1.0))
                .collect(),
            Physics::Heat(HeatSpec {
                alpha: 1e-2,
                beta: 1.0,
                source: 1.0,
                dirichlet_tag: "sink".into(),
            }),
            vec![],
            InitKind::Full,
        ),
        // Small heat sink at the middle of the left edge.
        BenchmarkName::HeatHighAlpha => (
            1.0,
            1.0,
            vec![BoundaryRegion::new("sink", Side::Left, 0.4, 0.6)],
            Physics::Heat(HeatSpec {
                alpha: 1.0,
                beta: 1e-2,
                source: 1.0,
                dirichlet_tag: "sink".into(),
            }),
            vec!["sink".to_string()],
            InitKind::Full,
        ),
    };
    BenchmarkSetup {
        mesh: MeshSpec {
            nx,
            ny,
            width,
            height,
            regions,
        },
        problem: ProblemSpec {
            physics,
            constraint,
            smoothing,
            material_tags,
        },
        phases,
        stop: StopRule::default(),
        init,
    }
}
