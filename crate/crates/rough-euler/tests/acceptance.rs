//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The tolerances here are the contract of the crate; they are asserted,
//! not tuned per run.

use once_cell::sync::Lazy;

use rough_euler::experiments::{
    continuous_dependence, local_order_test, wong_zakai, ContDepConfig, OrderTestConfig,
    WongZakaiConfig,
};
use rough_euler::io::diagnostics_csv;
use rough_euler::lagrangian::back_trace_vorticity_check;
use rough_euler::rough_path::{GaussianStream, GeometricRoughPathGrid, PiecewiseLinearPath};
use rough_euler::solver::{
    run, DriverSpec, InitSpec, LoopSpec, RunOutput, SolverConfig, XiMode, XiSpec,
};
use rough_euler::spectral::{
    biot_savart_2d, curl2d, dealias, divergence, gradient, leray_project, lie_adjoint, lie_vector,
    random_band_limited, SpectralGrid, VectorField,
};

fn criterion(number: u32, name: &str, pass: bool, detail: String) {
    println!(
        "{} criterion {number} ({name}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

/// Criteria carry their own runtime budgets, so they must not compete
/// for cores; each test runs its timed section exclusively.
static EXCLUSIVE: Lazy<std::sync::Mutex<()>> = Lazy::new(|| std::sync::Mutex::new(()));

fn exclusive() -> std::sync::MutexGuard<'static, ()> {
    EXCLUSIVE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Two non-constant solenoidal noise fields used across criteria.
fn noise_fields() -> Vec<XiSpec> {
    vec![
        XiSpec {
            modes: vec![
                XiMode {
                    n: [1, 0],
                    coeff_cos: [0.0, 0.125],
                    coeff_sin: [0.0, 0.0],
                },
                XiMode {
                    n: [0, 1],
                    coeff_cos: [0.0, 0.0],
                    coeff_sin: [0.125, 0.0],
                },
            ],
        },
        XiSpec {
            modes: vec![
                XiMode {
                    n: [1, 1],
                    coeff_cos: [0.1, -0.1],
                    coeff_sin: [0.0, 0.0],
                },
                XiMode {
                    n: [2, -1],
                    coeff_cos: [0.0, 0.0],
                    coeff_sin: [0.05, 0.1],
                },
            ],
        },
    ]
}

/// The conservation-run configuration shared by criteria 3, 4, 7 and 9:
/// Taylor–Green data, two non-constant noise fields, Brownian level 10.
fn conservation_config() -> SolverConfig {
    SolverConfig {
        grid_n: 64,
        t_final: 1.0,
        dt_max: Some(1.0 / 1024.0),
        cfl: 0.5,
        l_step: 0.1,
        p: 2.5,
        xi: noise_fields(),
        driver: DriverSpec::Brownian {
            level: 10,
            seed: 2026,
        },
        init: InitSpec::TaylorGreen { amp: 1.0 },
        diag_every: 1,
        snapshot_every: 0,
        loops: vec![
            LoopSpec {
                center: [std::f64::consts::PI, std::f64::consts::PI],
                radius: 1.0,
                points: 256,
            },
            LoopSpec {
                center: [2.0, 3.0],
                radius: 0.7,
                points: 256,
            },
            LoopSpec {
                center: [4.0, 2.0],
                radius: 1.2,
                points: 256,
            },
        ],
        blowup_factor: 1e3,
        disable_drift: false,
        disable_second_level: false,
        record_history: false,
            track_pressure: true,
    }
}

static CONSERVATION_RUN: Lazy<RunOutput> =
    Lazy::new(|| run(&conservation_config()).expect("conservation run completes"));

#[test]
fn criterion_1_rough_path_algebra() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let mut worst_chen = 0.0_f64;
    let mut worst_geom = 0.0_f64;
    let mut stream = GaussianStream::new(0xACCE97, 7);
    for case in 0..100 {
        let dim = 1 + (case % 3);
        let segments = 4 + (case * 7) % 61;
        let times: Vec<f64> = (0..=segments).map(|i| 0.1 * i as f64).collect();
        let values: Vec<f64> = (0..(segments + 1) * dim)
            .map(|_| stream.next_gaussian())
            .collect();
        let path = PiecewiseLinearPath::new(times, values, dim).unwrap();
        let lift = GeometricRoughPathGrid::canonical_lift(&path);
        worst_chen = worst_chen.max(lift.max_chen_defect());
        worst_geom = worst_geom.max(lift.max_geometricity_defect());
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        1,
        "rough path algebra",
        worst_chen <= 1e-12 && worst_geom <= 1e-12 && elapsed < 10.0,
        format!("max chen {worst_chen:.3e}, max geometricity {worst_geom:.3e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_2_spectral_operator_suite() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let grid = SpectralGrid::new(64).unwrap();

    let mut worst_inverse = 0.0_f64;
    for seed in 0..50 {
        let w = dealias(&random_band_limited(grid, 10_000 + seed, 21, 1.0)).zero_mean();
        let u = biot_savart_2d(&w);
        let gap = curl2d(&u).sub(&w).linf_norm();
        worst_inverse = worst_inverse.max(gap);
    }

    let mut worst_leray = 0.0_f64;
    let mut worst_graddrop = 0.0_f64;
    for seed in 0..50 {
        let v = VectorField::new(
            random_band_limited(grid, 20_000 + seed, 20, 1.0),
            random_band_limited(grid, 30_000 + seed, 20, 1.0),
        )
        .unwrap();
        let pv = leray_project(&v);
        let ppv = leray_project(&pv);
        worst_leray = worst_leray
            .max(ppv.u1.sub(&pv.u1).linf_norm())
            .max(ppv.u2.sub(&pv.u2).linf_norm());
        let f = random_band_limited(grid, 40_000 + seed, 20, 1.0);
        let g = leray_project(&gradient(&f));
        worst_graddrop = worst_graddrop.max(g.u1.linf_norm()).max(g.u2.linf_norm());
    }

    let mut worst_duality = 0.0_f64;
    for seed in 0..50 {
        let psi = random_band_limited(grid, 50_000 + seed, 6, 0.7);
        let gp = gradient(&psi);
        let xi = VectorField::new(gp.u2.scaled(-1.0), gp.u1.clone()).unwrap();
        let w = VectorField::new(
            random_band_limited(grid, 60_000 + seed, 20, 1.0),
            random_band_limited(grid, 70_000 + seed, 20, 1.0),
        )
        .unwrap();
        let u = VectorField::new(
            random_band_limited(grid, 80_000 + seed, 20, 1.0),
            random_band_limited(grid, 90_000 + seed, 20, 1.0),
        )
        .unwrap();
        let lw = lie_vector(&xi, &w);
        let lsu = lie_adjoint(&xi, &u).unwrap();
        let lhs = lw.u1.inner(&u.u1) + lw.u2.inner(&u.u2);
        let rhs = w.u1.inner(&lsu.u1) + w.u2.inner(&lsu.u2);
        worst_duality = worst_duality.max((lhs - rhs).abs());
    }

    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        2,
        "spectral operator suite",
        worst_inverse <= 1e-10
            && worst_leray <= 1e-12
            && worst_graddrop <= 1e-12
            && worst_duality <= 1e-10
            && elapsed < 30.0,
        format!(
            "curl∘BS gap {worst_inverse:.3e}, leray idempotence {worst_leray:.3e}, \
             gradient annihilation {worst_graddrop:.3e}, duality {worst_duality:.3e}, {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_3_vorticity_norm_conservation() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let run = &*CONSERVATION_RUN;
    assert!(run.blow_up.is_none(), "unexpected blow-up");
    let first = &run.diagnostics[0];
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut l2 = 0.0_f64;
    let mut l4 = 0.0_f64;
    let mut linf = 0.0_f64;
    for row in &run.diagnostics {
        l2 = l2.max(rel(row.l2_vort, first.l2_vort));
        l4 = l4.max(rel(row.l4_vort, first.l4_vort));
        linf = linf.max(rel(row.linf_vort, first.linf_vort));
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        3,
        "2d vorticity norm conservation",
        l2 <= 1e-4 && l4 <= 1e-4 && linf <= 1e-3 && elapsed < 300.0,
        format!("drift L2 {l2:.3e}, L4 {l4:.3e}, Linf {linf:.3e}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_4_kelvin_circulation() {
    let _lock = exclusive();
    let run = &*CONSERVATION_RUN;
    let mut detail = String::new();
    let mut pass = true;
    for (idx, series) in run.loops.iter().enumerate() {
        let gamma0 = series.initial_circulation;
        let tolerance = 1e-3 * (1.0 + gamma0.abs());
        let drift = run
            .diagnostics
            .iter()
            .map(|r| (r.circulations[idx] - gamma0).abs())
            .fold(0.0, f64::max);
        pass &= drift <= tolerance;
        detail.push_str(&format!(
            "loop {idx}: Γ0 {gamma0:.4}, drift {drift:.3e} (tol {tolerance:.3e}); "
        ));
    }
    criterion(4, "kelvin circulation", pass, detail);
}

#[test]
fn criterion_5_local_step_order() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let base = SolverConfig {
        grid_n: 64,
        t_final: 1.0,
        dt_max: None,
        cfl: 0.5,
        l_step: 0.5,
        p: 2.5,
        xi: noise_fields(),
        driver: DriverSpec::Smooth {
            name: "sincos".into(),
            segments: 4096,
        },
        init: InitSpec::TaylorGreen { amp: 1.0 },
        diag_every: 1,
        snapshot_every: 0,
        loops: vec![],
        blowup_factor: 1e3,
        disable_drift: true,
        disable_second_level: false,
        record_history: false,
            track_pressure: true,
    };
    let outcome = local_order_test(&OrderTestConfig {
        base,
        h: 0.2,
        refinements: 3,
        substeps: 128,
    })
    .expect("order test runs");
    let elapsed = start.elapsed().as_secs_f64();
    let detail: Vec<String> = outcome
        .report
        .cases
        .iter()
        .map(|c| format!("{}: {:?}", c.name, c.metrics))
        .collect();
    criterion(
        5,
        "local remainder order",
        outcome.report.passed && elapsed < 60.0,
        format!("{} ({elapsed:.1}s)", detail.join("; ")),
    );
}

#[test]
fn criterion_6_wong_zakai_convergence() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let mut base = conservation_config();
    base.loops.clear();
    base.diag_every = 32;
    base.dt_max = Some(1.0 / 512.0);
    let config = WongZakaiConfig {
        base,
        n_min: 3,
        n_max: 7,
        seed: 1,
        extra_seeds: (2..=10).collect(),
    };
    let outcome = wong_zakai(&config).expect("wong-zakai sweep runs");
    let passing = outcome.report.cases.iter().filter(|c| c.passed).count();
    let total = outcome.report.cases.len();
    let first_seed = &outcome.report.cases[0];
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        6,
        "wong-zakai dyadic convergence",
        first_seed.passed && passing >= 9 && total == 10 && elapsed < 900.0,
        format!(
            "seed 1 contraction {:.4}; {passing}/{total} seeds pass; {elapsed:.1}s",
            first_seed.metrics["contraction"]
        ),
    );
}

#[test]
fn criterion_7_pushforward_representation() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let mut coarse = conservation_config();
    coarse.t_final = 0.5;
    coarse.dt_max = Some(0.5 / 512.0);
    coarse.driver = DriverSpec::Brownian { level: 9, seed: 2026 };
    coarse.loops.clear();
    coarse.diag_every = 64;
    coarse.record_history = true;
    let coarse_run = run(&coarse).expect("coarse run completes");
    let defect = back_trace_vorticity_check(&coarse_run, 24, 0.5).expect("back trace");

    let mut fine = coarse.clone();
    fine.grid_n = 128;
    fine.dt_max = Some(0.5 / 1024.0);
    fine.driver = DriverSpec::Brownian {
        level: 10,
        seed: 2026,
    };
    let fine_run = run(&fine).expect("fine run completes");
    let fine_defect = back_trace_vorticity_check(&fine_run, 24, 0.5).expect("back trace");

    let ratio = fine_defect / defect;
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        7,
        "vorticity push-forward",
        defect <= 5e-3 && ratio <= 0.5 && elapsed < 300.0,
        format!("defect {defect:.3e}, refined {fine_defect:.3e}, ratio {ratio:.3}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_8_continuous_dependence() {
    let _lock = exclusive();
    let start = std::time::Instant::now();
    let mut base = conservation_config();
    base.loops.clear();
    base.diag_every = 32;
    let outcome = continuous_dependence(&ContDepConfig {
        base,
        epsilons: vec![1e-2, 1e-3],
        driver_level_case: false,
    })
    .expect("cont-dep runs");
    let ratio_case = outcome
        .report
        .cases
        .iter()
        .find(|c| c.name == "ratio_stability")
        .expect("ratio case present");
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        8,
        "continuous dependence on data",
        outcome.report.passed && elapsed < 300.0,
        format!(
            "deviation-ratio spread {:.3} (must be <= 3), {elapsed:.1}s",
            ratio_case.metrics["ratio_max_over_min"]
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let _lock = exclusive();
    let config = conservation_config();
    let a = run(&config).expect("first run");
    let b = run(&config).expect("second run");
    let csv_a = diagnostics_csv(&a.diagnostics, a.loops.len());
    let csv_b = diagnostics_csv(&b.diagnostics, b.loops.len());
    let snapshots_equal = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .all(|((ta, fa), (tb, fb))| ta == tb && fa.values() == fb.values());
    criterion(
        9,
        "bitwise determinism",
        csv_a == csv_b && snapshots_equal,
        format!(
            "diagnostics csv {} bytes, snapshots bitwise equal: {snapshots_equal}",
            csv_a.len()
        ),
    );
}

/// The scalar back-trace is exact at t = 0 whatever the configuration.
#[test]
fn backtrace_zero_time_sanity() {
    let _lock = exclusive();
    let mut config = conservation_config();
    config.t_final = 0.0;
    config.loops.clear();
    let out = run(&config).unwrap();
    assert_eq!(
        back_trace_vorticity_check(&out, 8, 0.0).unwrap(),
        0.0
    );
}

/// Solenoidality and mean-freeness hold along the conservation run.
#[test]
fn conservation_run_constraints() {
    let _lock = exclusive();
    let run = &*CONSERVATION_RUN;
    assert!(run.final_state.omega.mean().abs() <= 1e-13);
    assert!(divergence(&run.final_state.u).linf_norm() <= 1e-10);
    let recon = biot_savart_2d(&run.final_state.omega);
    let gap = curl2d(&recon).sub(&run.final_state.omega).linf_norm();
    assert!(gap <= 1e-10, "BS consistency {gap:.3e}");
}
