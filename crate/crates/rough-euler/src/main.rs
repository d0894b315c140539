//! Command-line entry point.
//!
//! Exit codes: 0 all assertions of the invoked command passed; 1 usage
//! or configuration error; 2 I/O or file-format error; 3 experiment
//! criteria failed; 4 numerical failure (blow-up or unsplittable step).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use rough_euler::experiments::{
    continuous_dependence, invariant_suite, local_order_test, wong_zakai, ContDepConfig,
    ExperimentOutcome, OrderTestConfig, WongZakaiConfig,
};
use rough_euler::io::{self, IoError};
use rough_euler::rough_path::GeometricRoughPathGrid;
use rough_euler::solver::{self, SolverError};

#[derive(Parser)]
#[command(
    name = "rough-euler",
    version,
    about = "2D incompressible Euler dynamics with rough transport noise on the torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and emit diagnostics and snapshots.
    Simulate {
        /// JSON solver configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: simulate_<unix-time>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the driver seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dyadic-level convergence study against the finest level.
    WongZakai {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One-step order test on a smooth driver with drift disabled.
    OrderTest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuous dependence on perturbed initial data.
    ContDep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full invariant suite on one configuration.
    Invariants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Canonically lift a path CSV to per-interval (Z, ZZ) increments.
    LiftPath {
        /// Input CSV with header t,z_1,...,z_K.
        input: PathBuf,
        /// Output CSV with columns s,t,Z_1..Z_K,ZZ_11..ZZ_KK.
        output: PathBuf,
        /// Re-verify the Chen and geometricity identities on the lift.
        #[arg(long)]
        verify: bool,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CRITERIA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn io_exit(e: &IoError) -> u8 {
    match e {
        IoError::ConfigParse { .. } | IoError::ConfigSemantic(_) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn solver_exit(e: &SolverError) -> u8 {
    match e {
        SolverError::Config(_) | SolverError::RoughPath(_) | SolverError::Spectral(_) => {
            EXIT_CONFIG
        }
        SolverError::UnsplittableStep { .. } | SolverError::BlowUp { .. } => EXIT_NUMERICAL,
        SolverError::Io(_) => EXIT_IO,
    }
}

fn default_out_dir(kind: &str) -> PathBuf {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from(format!("{kind}_{stamp}"))
}

fn prepare_out_dir(out: &Path, config_bytes: &[u8]) -> Result<(), IoError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), config_bytes)?;
    Ok(())
}

fn write_experiment(out: &Path, outcome: &ExperimentOutcome) -> Result<(), IoError> {
    io::write_json(&out.join("report.json"), &outcome.report)?;
    let cases = out.join("cases");
    fs::create_dir_all(&cases)?;
    for (name, body) in &outcome.case_csvs {
        fs::write(cases.join(name), body)?;
    }
    Ok(())
}

fn experiment_exit(out_dir: &Path, outcome: &ExperimentOutcome) -> ExitCode {
    for case in &outcome.report.cases {
        for criterion in &case.criteria {
            println!(
                "{} {} / {}: {}",
                if criterion.passed { "PASS" } else { "FAIL" },
                case.name,
                criterion.name,
                criterion.detail
            );
        }
    }
    println!(
        "report: {} ({})",
        out_dir.join("report.json").display(),
        if outcome.report.passed { "passed" } else { "FAILED" }
    );
    if outcome.report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CRITERIA)
    }
}

fn simulate(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let bytes = match fs::read(config_path) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", config_path.display())),
    };
    let config = match io::parse_solver_config(&bytes) {
        Ok(c) => c,
        Err(e) => return fail(io_exit(&e), e),
    };
    let out_dir = out.unwrap_or_else(|| default_out_dir("simulate"));
    if let Err(e) = prepare_out_dir(&out_dir, &bytes) {
        return fail(EXIT_IO, e);
    }
    let run = match solver::run_seeded(&config, seed) {
        Ok(r) => r,
        Err(e) => return fail(solver_exit(&e), e),
    };
    if let Err(e) = io::write_run_outputs(&out_dir, &run) {
        return fail(EXIT_IO, e);
    }
    println!(
        "simulate: {} accepted steps, {} rejected; outputs in {}",
        run.accepted_steps,
        run.rejected_steps,
        out_dir.display()
    );
    if let Some(b) = &run.blow_up {
        eprintln!(
            "blow-up: |omega|_inf {:.3e} exceeded ceiling {:.3e} at t = {}",
            b.linf, b.ceiling, b.t
        );
        return ExitCode::from(EXIT_NUMERICAL);
    }
    ExitCode::SUCCESS
}

fn load_experiment_config<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<(T, Vec<u8>), (u8, String)> {
    let bytes = fs::read(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    let config: T = serde_json::from_slice(&bytes).map_err(|e| {
        (
            EXIT_CONFIG,
            format!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ),
        )
    })?;
    Ok((config, bytes))
}

fn run_experiment<C, F>(
    kind: &str,
    config_path: &Path,
    out: Option<PathBuf>,
    runner: F,
) -> ExitCode
where
    C: serde::de::DeserializeOwned,
    F: FnOnce(C) -> Result<ExperimentOutcome, SolverError>,
{
    let (config, bytes) = match load_experiment_config::<C>(config_path) {
        Ok(v) => v,
        Err((code, msg)) => return fail(code, msg),
    };
    let out_dir = out.unwrap_or_else(|| default_out_dir(kind));
    if let Err(e) = prepare_out_dir(&out_dir, &bytes) {
        return fail(EXIT_IO, e);
    }
    let outcome = match runner(config) {
        Ok(o) => o,
        Err(e) => return fail(solver_exit(&e), e),
    };
    if let Err(e) = write_experiment(&out_dir, &outcome) {
        return fail(EXIT_IO, e);
    }
    experiment_exit(&out_dir, &outcome)
}

fn lift_path(input: &Path, output: &Path, verify: bool) -> ExitCode {
    let path = match io::read_path_csv(input) {
        Ok(p) => p,
        Err(e) => return fail(io_exit(&e), e),
    };
    let lift = GeometricRoughPathGrid::canonical_lift(&path);
    if let Err(e) = io::write_lift_csv(output, &lift) {
        return fail(EXIT_IO, e);
    }
    println!(
        "lifted {} segments of a {}-dimensional path to {}",
        lift.num_intervals(),
        lift.dim(),
        output.display()
    );
    if verify {
        let max_chen = lift.max_chen_defect();
        let max_geom = lift.max_geometricity_defect();
        println!("max chen defect: {max_chen:.3e}");
        println!("max geometricity defect: {max_geom:.3e}");
        if max_chen > 1e-12 || max_geom > 1e-12 {
            return ExitCode::from(EXIT_CRITERIA);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => simulate(&config, out, seed),
        Command::WongZakai { config, out, seed } => {
            run_experiment("wong_zakai", &config, out, |mut c: WongZakaiConfig| {
                if let Some(s) = seed {
                    c.seed = s;
                }
                wong_zakai(&c)
            })
        }
        Command::OrderTest { config, out } => {
            run_experiment("order_test", &config, out, |c: OrderTestConfig| {
                local_order_test(&c)
            })
        }
        Command::ContDep { config, out } => {
            run_experiment("cont_dep", &config, out, |c: ContDepConfig| {
                continuous_dependence(&c)
            })
        }
        Command::Invariants { config, out, seed } => {
            run_experiment("invariants", &config, out, |mut c: solver::SolverConfig| {
                if let (Some(s), solver::DriverSpec::Brownian { level, .. }) = (seed, &c.driver) {
                    c.driver = solver::DriverSpec::Brownian { level: *level, seed: s };
                }
                invariant_suite(&c)
            })
        }
        Command::LiftPath {
            input,
            output,
            verify,
        } => lift_path(&input, &output, verify),
    }
}
