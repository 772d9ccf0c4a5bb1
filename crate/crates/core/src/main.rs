use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nldiff_topo::benchmarks::{benchmark, benchmark_at, BenchmarkName, BenchmarkSetup};
use nldiff_topo::evolve::Scheme;
use nldiff_topo::io::{apply_grid, parse_config, parse_grid, run_setup, RunConfig, RunSummary};
use nldiff_topo::optimizer::{validate_phases, StopReason};
use nldiff_topo::Error;

#[derive(Parser)]
#[command(
    name = "nldiff-topo",
    version,
    about = "Level-set topology optimization by nonlinear diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem described by a TOML document.
    Run {
        config: PathBuf,
        /// Record per-iteration wall time (makes histories non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run a named benchmark with optional overrides.
    Benchmark {
        /// cantilever, mbb, bridge, mechanism, heat_low_alpha or heat_high_alpha
        name: String,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// nld, nnld or dnld
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Output directory (default: out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        snapshot_every: usize,
        #[arg(long)]
        timing: bool,
    },
    /// Run every point of a parameter grid concurrently.
    Sweep {
        config: PathBuf,
        /// e.g. "q=1,2,4,6;dt=0.5,0.7" (keys: q, dt, tau, rho)
        #[arg(long)]
        grid: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse(_) => 2,
                Error::Solver { .. } => 3,
                _ => 1,
            })
        }
    }
}

fn dispatch(command: Command) -> nldiff_topo::Result<ExitCode> {
    match command {
        Command::Run { config, timing } => {
            let cfg = load(&config)?;
            let setup = cfg.resolve()?;
            let summary = run_setup(
                &setup,
                &cfg.output_dir,
                cfg.snapshot_every,
                timing || cfg.record_wall_time,
            )?;
            Ok(report(None, &summary))
        }
        Command::Benchmark {
            name,
            q,
            dt,
            scheme,
            nx,
            ny,
            max_steps,
            out,
            snapshot_every,
            timing,
        } => {
            let bench: BenchmarkName = name.parse()?;
            let mut setup = match (nx, ny) {
                (None, None) => benchmark(bench),
                (x, y) => {
                    let (dx, dy) = bench.default_resolution();
                    benchmark_at(bench, x.unwrap_or(dx), y.unwrap_or(dy))
                }
            };
            let scheme = scheme.map(|s| s.parse::<Scheme>()).transpose()?;
            for ph in &mut setup.phases {
                if let Some(q) = q {
                    ph.params.q = q;
                }
                if let Some(dt) = dt {
                    ph.params.dt = dt;
                }
                if let Some(s) = scheme {
                    ph.params.scheme = s;
                }
            }
            if let Some(m) = max_steps {
                setup.stop.max_steps = m;
            }
            validate_phases(&setup.phases)?;
            setup.stop.validate()?;
            let out = out.unwrap_or_else(|| Path::new("out").join(bench.as_str()));
            let summary = run_setup(&setup, &out, snapshot_every, timing)?;
            Ok(report(None, &summary))
        }
        Command::Sweep { config, grid } => {
            let cfg = load(&config)?;
            let base: BenchmarkSetup = cfg.resolve()?;
            let points = apply_grid(&base, &parse_grid(&grid)?)?;
            let results: Vec<(String, nldiff_topo::Result<RunSummary>)> =
                std::thread::scope(|scope| {
                    let handles: Vec<_> = points
                        .iter()
                        .map(|(name, setup)| {
                            let dir = cfg.output_dir.join(name);
                            let every = cfg.snapshot_every;
                            let timing = cfg.record_wall_time;
                            scope.spawn(move || run_setup(setup, &dir, every, timing))
                        })
                        .collect();
                    points
                        .iter()
                        .zip(handles)
                        .map(|((name, _), h)| {
                            (name.clone(), h.join().expect("sweep worker panicked"))
                        })
                        .collect()
                });
            let mut code = ExitCode::SUCCESS;
            for (name, res) in results {
                match res {
                    Ok(summary) => {
                        if report(Some(&name), &summary) != ExitCode::SUCCESS {
                            code = ExitCode::from(3);
                        }
                    }
                    Err(e) => {
                        eprintln!("[{name}] error: {e}");
                        code = ExitCode::from(1);
                    }
                }
            }
            Ok(code)
        }
    }
}

fn load(path: &Path) -> nldiff_topo::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn report(label: Option<&str>, s: &RunSummary) -> ExitCode {
    let prefix = label.map(|l| format!("[{l}] ")).unwrap_or_default();
    println!("{prefix}stop: {}", s.reason);
    println!(
        "{prefix}final: F={:.6e} G={:.6e} steps={} volume_fraction={:.4}",
        s.objective, s.constraint, s.steps, s.volume_fraction
    );
    match s.reason {
        StopReason::SolverFailure(_) => ExitCode::from(3),
        _ => ExitCode::SUCCESS,
    }
}
