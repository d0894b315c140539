//! Geometric rough paths over finite time grids and a 2D pseudospectral
//! solver for incompressible Euler dynamics with rough Lie-transport noise
//! on the flat torus.
//!
//! The crate is organised around five subsystems:
//!
//! * [`rough_path`] — piecewise-linear paths, canonical level-2 lifts,
//!   Chen composition, geometricity checks, and p-variation controls.
//! * [`spectral`] — real periodic fields on the N×N torus grid with
//!   spectral gradient/divergence/curl, inverse Laplacian, Leray
//!   projection, Biot–Savart inversion, and Lie transport operators.
//! * [`solver`] — the time stepper for the scalar-vorticity form of the
//!   rough Euler system: Strang-split drift with a second-order rough
//!   increment, adaptive partitioning, and pressure/harmonic recovery.
//! * [`lagrangian`] — tracer integration, Kelvin circulation along
//!   advected loops, and the vorticity push-forward check.
//! * [`experiments`] — scripted convergence and invariant studies with
//!   JSON/CSV reports.
//!
//! File formats and the CLI live in [`io`].

pub mod experiments;
pub mod io;
pub mod lagrangian;
pub mod rough_path;
pub mod solver;
pub mod spectral;

/// Number of worker threads honoured by parallel sections.
///
/// Reads `ROUGH_EULER_THREADS`; absent or unparsable values fall back to
/// machine parallelism.
pub fn worker_threads() -> usize {
    match std::env::var("ROUGH_EULER_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n >= 1),
        Err(_) => None,
    }
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}
