//! Time stepper for the 2D rough Euler system in scalar-vorticity form:
//!
//! ```text
//! dω̃ + u·∇ω̃ dt + ξ_k·∇ω̃ dZ^k = 0,   u = BS ω̃.
//! ```
//!
//! One accepted step over [s,t] composes a half-interval drift stage
//! (classical four-stage Runge–Kutta on the self-advection term), the
//! second-order rough increment built from (Z_{st}, 𝕫_{st}), and another
//! half-interval drift stage. Step acceptance is controlled by the
//! single-interval roughness proxy |Z|^p + |𝕫|^{p/2} and a CFL bound on
//! the cached velocity; rejected spans are bisected along the driver
//! grid. Pressure gradient and harmonic accumulators use left-endpoint
//! germs frozen at s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rough_path::{
    brownian_dyadic_path, GeometricRoughPathGrid, Increment, PiecewiseLinearPath, RoughPathError,
};
use crate::spectral::{
    advect_scalar, biot_savart_2d, dealias, gradient_project, harmonic_part, leray_project,
    lie_adjoint, random_band_limited, taylor_green_vorticity, ScalarField, SpectralError,
    SpectralGrid, VectorField,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    RoughPath(#[from] RoughPathError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("step over [{s}, {t}] rejected at finest driver resolution: {reason}")]
    UnsplittableStep { s: f64, t: f64, reason: StepRejection },
    #[error("vorticity sup-norm {linf:.3e} exceeded the blow-up ceiling {ceiling:.3e} at t = {t}")]
    BlowUp { t: f64, linf: f64, ceiling: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRejection {
    /// |Z|^p + |𝕫|^{p/2} above the acceptance threshold.
    RoughnessExceeded { proxy: f64, limit: f64 },
    /// |u|_∞ (t−s) above CFL·Δx.
    CflExceeded { speed_dt: f64, limit: f64 },
}

impl std::fmt::Display for StepRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepRejection::RoughnessExceeded { proxy, limit } => {
                write!(f, "roughness proxy {proxy:.3e} > {limit:.3e}")
            }
            StepRejection::CflExceeded { speed_dt, limit } => {
                write!(f, "|u|inf*dt {speed_dt:.3e} > CFL*dx {limit:.3e}")
            }
        }
    }
}

/// One Fourier mode of a noise field: contributes
/// `coeff_cos·cos(n·x) + coeff_sin·sin(n·x)` componentwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiMode {
    pub n: [i32; 2],
    #[serde(default)]
    pub coeff_cos: [f64; 2],
    #[serde(default)]
    pub coeff_sin: [f64; 2],
}

/// Finite Fourier sum defining one noise vector field ξ_k; the field is
/// Leray-projected at load so it enters the dynamics solenoidal and
/// mean-free regardless of the raw coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSpec {
    pub modes: Vec<XiMode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    /// Dyadic piecewise-linear Brownian sample, canonically lifted.
    Brownian { level: u32, seed: u64 },
    /// Named smooth path sampled on `segments` equal intervals.
    Smooth {
        name: String,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    /// Path read from CSV (`t,z_1,...,z_K`).
    Csv { path: String },
}

fn default_segments() -> usize {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    TaylorGreen { amp: f64 },
    Random { seed: u64, max_mode: i32, amp: f64 },
    Snapshot { path: String },
}

/// Closed circular tracer loop specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_loop_points")]
    pub points: usize,
}

fn default_loop_points() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grid_n: usize,
    pub t_final: f64,
    #[serde(default)]
    pub dt_max: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_l_step")]
    pub l_step: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub xi: Vec<XiSpec>,
    pub driver: DriverSpec,
    pub init: InitSpec,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub loops: Vec<LoopSpec>,
    #[serde(default = "default_blowup_factor")]
    pub blowup_factor: f64,
    /// Test hook: skip the drift stages (pure rough transport).
    #[serde(default)]
    pub disable_drift: bool,
    /// Test hook: drop the second-level term from the rough increment.
    #[serde(default)]
    pub disable_second_level: bool,
    /// Keep per-step left-endpoint fields and increments for
    /// pressure recovery and back-tracing.
    #[serde(default)]
    pub record_history: bool,
    /// Accumulate the pressure/harmonic germs each step (skippable when
    /// only field trajectories matter).
    #[serde(default = "default_true")]
    pub track_pressure: bool,
}

fn default_true() -> bool {
    true
}

fn default_cfl() -> f64 {
    0.5
}
fn default_l_step() -> f64 {
    0.1
}
fn default_p() -> f64 {
    2.5
}
fn default_diag_every() -> usize {
    1
}
fn default_blowup_factor() -> f64 {
    1e3
}

impl SolverConfig {
    /// Effective maximal step: configured value or 1e−2·T.
    pub fn effective_dt_max(&self) -> f64 {
        self.dt_max.unwrap_or(0.01 * self.t_final)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let err = |m: &str| Err(SolverError::Config(m.to_string()));
        if self.grid_n % 2 != 0 {
            return err("grid_n must be even");
        }
        if self.grid_n < 8 {
            return err("grid_n must be >= 8");
        }
        if self.t_final < 0.0 {
            return err("t_final must be >= 0");
        }
        if self.t_final > 0.0 && self.effective_dt_max() <= 0.0 {
            return err("dt_max must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return err("cfl must lie in (0,1]");
        }
        if self.l_step <= 0.0 {
            return err("l_step must be positive");
        }
        if !(2.0..3.0).contains(&self.p) {
            return err("p in [2,3)");
        }
        if self.blowup_factor <= 0.0 {
            return err("blowup_factor must be positive");
        }
        let cutoff = (self.grid_n / 3) as i32;
        for (k, spec) in self.xi.iter().enumerate() {
            for mode in &spec.modes {
                if mode.n[0].abs() > cutoff || mode.n[1].abs() > cutoff {
                    return Err(SolverError::Config(format!(
                        "xi[{k}] mode ({}, {}) exceeds the dealias cutoff {cutoff}",
                        mode.n[0], mode.n[1]
                    )));
                }
            }
        }
        if let DriverSpec::Smooth { name, segments } = &self.driver {
            if !matches!(name.as_str(), "sincos" | "linear") {
                return Err(SolverError::Config(format!(
                    "driver.name must be one of sincos, linear; got {name}"
                )));
            }
            if *segments == 0 {
                return err("driver.segments must be >= 1");
            }
        }
        if let DriverSpec::Brownian { level, .. } = self.driver {
            if level > 24 {
                return err("driver.level must be <= 24");
            }
        }
        if let InitSpec::Random { max_mode, .. } = self.init {
            if max_mode < 1 {
                return err("init.max_mode must be >= 1");
            }
        }
        for (i, l) in self.loops.iter().enumerate() {
            if l.points < 8 {
                return Err(SolverError::Config(format!("loops[{i}].points must be >= 8")));
            }
            if !(l.radius > 0.0) {
                return Err(SolverError::Config(format!(
                    "loops[{i}].radius must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Driver dimension: one path component per noise field.
    pub fn noise_dim(&self) -> usize {
        self.xi.len()
    }
}

/// Builds the noise fields on the grid: evaluate the configured Fourier
/// sums and Leray-project.
pub fn build_xi_fields(
    grid: SpectralGrid,
    specs: &[XiSpec],
) -> Result<Vec<VectorField>, SolverError> {
    specs
        .iter()
        .map(|spec| {
            let component = |c: usize| {
                ScalarField::from_fn(grid, |x1, x2| {
                    spec.modes
                        .iter()
                        .map(|m| {
                            let phase = m.n[0] as f64 * x1 + m.n[1] as f64 * x2;
                            m.coeff_cos[c] * phase.cos() + m.coeff_sin[c] * phase.sin()
                        })
                        .sum()
                })
            };
            let raw = VectorField::new(component(0), component(1))?;
            Ok(leray_project(&raw))
        })
        .collect()
}

/// Builds the driver path for a config with `dim ≥ 1` noise fields.
pub fn build_driver_path(
    config: &SolverConfig,
    dim: usize,
    seed_override: Option<u64>,
) -> Result<PiecewiseLinearPath, SolverError> {
    match &config.driver {
        DriverSpec::Brownian { level, seed } => Ok(brownian_dyadic_path(
            seed_override.unwrap_or(*seed),
            *level,
            config.t_final,
            dim,
        )?),
        DriverSpec::Smooth { name, segments } => {
            smooth_named_path(name, *segments, config.t_final, dim)
        }
        DriverSpec::Csv { path } => {
            let p = crate::io::read_path_csv(std::path::Path::new(path))
                .map_err(|e| SolverError::Config(format!("driver csv: {e}")))?;
            if p.dim() != dim {
                return Err(SolverError::Config(format!(
                    "driver csv has dimension {}, expected {dim}",
                    p.dim()
                )));
            }
            Ok(p)
        }
    }
}

/// Named smooth paths for deterministic drivers and order tests.
pub fn smooth_named_path(
    name: &str,
    segments: usize,
    t_final: f64,
    dim: usize,
) -> Result<PiecewiseLinearPath, SolverError> {
    let times: Vec<f64> = (0..=segments)
        .map(|i| t_final * i as f64 / segments as f64)
        .collect();
    let mut values = Vec::with_capacity((segments + 1) * dim);
    match name {
        "sincos" => {
            if dim != 2 {
                return Err(SolverError::Config(format!(
                    "driver sincos is 2-dimensional; config has {dim} noise fields"
                )));
            }
            for &t in &times {
                values.push(t.sin());
                values.push(t.cos());
            }
        }
        "linear" => {
            if dim != 1 {
                return Err(SolverError::Config(format!(
                    "driver linear is 1-dimensional; config has {dim} noise fields"
                )));
            }
            values.extend_from_slice(&times);
        }
        other => {
            return Err(SolverError::Config(format!("unknown smooth driver {other}")));
        }
    }
    Ok(PiecewiseLinearPath::new(times, values, dim)?)
}

pub fn build_initial_vorticity(
    grid: SpectralGrid,
    init: &InitSpec,
) -> Result<ScalarField, SolverError> {
    let field = match init {
        InitSpec::TaylorGreen { amp } => taylor_green_vorticity(grid, *amp),
        InitSpec::Random { seed, max_mode, amp } => {
            random_band_limited(grid, *seed, *max_mode, *amp)
        }
        InitSpec::Snapshot { path } => {
            let f = crate::io::load_scalar_snapshot(std::path::Path::new(path))
                .map_err(|e| SolverError::Config(format!("init snapshot: {e}")))?;
            if f.grid() != grid {
                return Err(SolverError::Config(format!(
                    "init snapshot grid {} does not match grid_n {}",
                    f.grid().size(),
                    grid.size()
                )));
            }
            f
        }
    };
    Ok(dealias(&field).zero_mean())
}

/// −u·∇ω̃ with u = BS ω̃: the deterministic Euler drift.
pub fn drift_rhs(w: &ScalarField) -> ScalarField {
    let u = biot_savart_2d(w);
    advect_scalar(&u, w).scaled(-1.0)
}

/// Second-order rough increment of the vorticity over one span:
/// −Σ_k (ξ_k·∇w) Z^k + Σ_{k,l} ξ_k·∇(ξ_l·∇w) 𝕫^{lk}. The outer
/// operator index k pairs with the later integrator index of 𝕫^{lk}.
pub fn rough_increment(
    w: &ScalarField,
    xi: &[VectorField],
    z: &[f64],
    zz: &[f64],
    second_level: bool,
) -> ScalarField {
    let k_dim = xi.len();
    assert_eq!(z.len(), k_dim);
    assert_eq!(zz.len(), k_dim * k_dim);
    let mut out = ScalarField::zeros(w.grid());
    let first: Vec<ScalarField> = xi.iter().map(|f| advect_scalar(f, w)).collect();
    for (k, f) in first.iter().enumerate() {
        out = out.axpy(-z[k], f);
    }
    if second_level {
        for (l, inner) in first.iter().enumerate() {
            for (k, field_k) in xi.iter().enumerate() {
                let coeff = zz[l * k_dim + k];
                if coeff != 0.0 {
                    out = out.axpy(coeff, &advect_scalar(field_k, inner));
                }
            }
        }
    }
    dealias(&out)
}

fn rk4_drift(w: &ScalarField, dt: f64) -> ScalarField {
    let k1 = drift_rhs(w);
    let k2 = drift_rhs(&w.axpy(0.5 * dt, &k1));
    let k3 = drift_rhs(&w.axpy(0.5 * dt, &k2));
    let k4 = drift_rhs(&w.axpy(dt, &k3));
    let mut out = w.axpy(dt / 6.0, &k1);
    out = out.axpy(dt / 3.0, &k2);
    out = out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4)
}

#[derive(Debug, Clone, Copy)]
pub struct StepControls {
    pub disable_drift: bool,
    pub second_level: bool,
    pub track_pressure: bool,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            disable_drift: false,
            second_level: true,
            track_pressure: true,
        }
    }
}

/// One Strang-split field update over a span with increments (z, zz).
pub fn strang_step(
    w: &ScalarField,
    xi: &[VectorField],
    z: &[f64],
    zz: &[f64],
    dt: f64,
    controls: StepControls,
) -> ScalarField {
    let mut field = w.clone();
    if !controls.disable_drift && dt != 0.0 {
        field = rk4_drift(&field, 0.5 * dt);
    }
    if !xi.is_empty() {
        let kick = rough_increment(&field, xi, z, zz, controls.second_level);
        field = field.add(&kick);
    }
    if !controls.disable_drift && dt != 0.0 {
        field = rk4_drift(&field, 0.5 * dt);
    }
    dealias(&field).zero_mean()
}

/// Left-endpoint germ of the rough integral ∫ £*_{ξ_k} u dZ^k over one
/// span: £*_{ξ_k}u Z^k + £*_{ξ_k} P £*_{ξ_l} u 𝕫^{lk}.
pub fn adjoint_transport_germ(
    u: &VectorField,
    xi: &[VectorField],
    z: &[f64],
    zz: &[f64],
) -> Result<VectorField, SpectralError> {
    let k_dim = xi.len();
    let mut out = VectorField::zeros(u.grid());
    let adj: Vec<VectorField> = xi
        .iter()
        .map(|f| lie_adjoint(f, u))
        .collect::<Result<_, _>>()?;
    for (k, a) in adj.iter().enumerate() {
        out = out.axpy(z[k], a);
    }
    for (l, a) in adj.iter().enumerate() {
        let projected = leray_project(a);
        for (k, xi_k) in xi.iter().enumerate() {
            let coeff = zz[l * k_dim + k];
            if coeff != 0.0 {
                out = out.axpy(coeff, &lie_adjoint(xi_k, &projected)?);
            }
        }
    }
    Ok(out)
}

/// Instantaneous solver state with live diagnostics accumulators.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub omega: ScalarField,
    pub u: VectorField,
    pub grad_q_acc: VectorField,
    pub h_acc: [f64; 2],
    pub bkm_integral: f64,
}

impl SimState {
    pub fn new(t: f64, omega: ScalarField) -> Self {
        let omega = omega.zero_mean();
        let u = biot_savart_2d(&omega);
        let grid = omega.grid();
        Self {
            t,
            omega,
            u,
            grad_q_acc: VectorField::zeros(grid),
            h_acc: [0.0; 2],
            bkm_integral: 0.0,
        }
    }

    /// Advances over [t, t+dt] with given increments, accumulating the
    /// BKM integral and the pressure/harmonic germs at the left endpoint.
    pub fn advance(
        &self,
        xi: &[VectorField],
        z: &[f64],
        zz: &[f64],
        dt: f64,
        controls: StepControls,
    ) -> Result<SimState, SpectralError> {
        let mut next = self.clone();
        next.bkm_integral += crate::spectral::sup_norm(&self.omega) * dt;

        if controls.track_pressure {
            // δ(∇q) = −Q(u_s·∇u_s) dt + Q(germ);  δh = H(germ).
            let conv = VectorField {
                u1: advect_scalar(&self.u, &self.u.u1),
                u2: advect_scalar(&self.u, &self.u.u2),
            };
            let mut dq = gradient_project(&conv).scaled(-dt);
            if !xi.is_empty() {
                let germ = adjoint_transport_germ(&self.u, xi, z, zz)?;
                dq = dq.add(&gradient_project(&germ));
                let h = harmonic_part(&germ);
                next.h_acc[0] += h[0];
                next.h_acc[1] += h[1];
            }
            next.grad_q_acc = next.grad_q_acc.add(&dq);
        }

        next.omega = strang_step(&self.omega, xi, z, zz, dt, controls);
        next.u = biot_savart_2d(&next.omega);
        next.t = self.t + dt;
        Ok(next)
    }
}

/// One diagnostics row; circulation columns follow the configured loops.
#[derive(Debug, Clone)]
pub struct DiagRow {
    pub t: f64,
    pub l2_vort: f64,
    pub l4_vort: f64,
    pub linf_vort: f64,
    pub energy: f64,
    pub bkm_integral: f64,
    pub h: [f64; 2],
    pub circulations: Vec<f64>,
}

fn diag_row(state: &SimState, circulations: Vec<f64>) -> DiagRow {
    DiagRow {
        t: state.t,
        l2_vort: state.omega.l2_norm(),
        l4_vort: state.omega.lp_norm(4.0),
        linf_vort: crate::spectral::sup_norm(&state.omega),
        energy: 0.5 * state.u.l2_norm().powi(2),
        bkm_integral: state.bkm_integral,
        h: state.h_acc,
        circulations,
    }
}

/// Everything needed to replay one accepted step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub s: f64,
    pub t: f64,
    pub z: Vec<f64>,
    pub zz: Vec<f64>,
    pub omega_left: ScalarField,
}

#[derive(Debug, Clone)]
pub struct BlowUpReport {
    pub t: f64,
    pub linf: f64,
    pub ceiling: f64,
    pub bkm_integral: f64,
}

#[derive(Debug, Clone)]
pub struct LoopSeries {
    pub spec: LoopSpec,
    pub initial_circulation: f64,
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub grid: SpectralGrid,
    pub xi: Vec<VectorField>,
    pub controls: StepControls,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub diagnostics: Vec<DiagRow>,
    pub history: Vec<StepRecord>,
    pub loops: Vec<LoopSeries>,
    pub blow_up: Option<BlowUpReport>,
    pub final_state: SimState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

pub fn run(config: &SolverConfig) -> Result<RunOutput, SolverError> {
    run_impl(config, None, None)
}

/// Runs a configuration, optionally overriding the driver seed.
pub fn run_seeded(
    config: &SolverConfig,
    seed_override: Option<u64>,
) -> Result<RunOutput, SolverError> {
    run_impl(config, seed_override, None)
}

/// Runs with an explicit initial vorticity instead of the configured one.
pub fn run_with_initial(
    config: &SolverConfig,
    omega0: ScalarField,
) -> Result<RunOutput, SolverError> {
    run_impl(config, None, Some(omega0))
}

fn run_impl(
    config: &SolverConfig,
    seed_override: Option<u64>,
    initial_override: Option<ScalarField>,
) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let grid = SpectralGrid::new(config.grid_n)?;
    let omega0 = match initial_override {
        Some(f) => {
            if f.grid() != grid {
                return Err(SolverError::Config(
                    "initial override grid does not match grid_n".into(),
                ));
            }
            dealias(&f).zero_mean()
        }
        None => build_initial_vorticity(grid, &config.init)?,
    };
    let xi = build_xi_fields(grid, &config.xi)?;
    let state0 = SimState::new(0.0, omega0);

    let mut loops: Vec<LoopSeries> = config
        .loops
        .iter()
        .map(|spec| {
            let positions = crate::lagrangian::circle_loop(spec.center, spec.radius, spec.points);
            let circ = crate::lagrangian::circulation(&positions, &state0.u)
                .expect("configured loop is degenerate");
            LoopSeries {
                spec: spec.clone(),
                initial_circulation: circ,
                positions,
            }
        })
        .collect();

    let controls = StepControls {
        disable_drift: config.disable_drift,
        second_level: !config.disable_second_level,
        track_pressure: config.track_pressure,
    };
    let noise = crate::lagrangian::NoiseFields::new(&xi);

    let circulations = |state: &SimState, loops: &[LoopSeries]| -> Vec<f64> {
        loops
            .iter()
            .map(|l| crate::lagrangian::circulation(&l.positions, &state.u).unwrap_or(f64::NAN))
            .collect()
    };

    let mut diagnostics = vec![diag_row(&state0, circulations(&state0, &loops))];
    let mut snapshots = vec![(0.0, state0.omega.clone())];
    let mut history = Vec::new();

    if config.t_final == 0.0 {
        return Ok(RunOutput {
            grid,
            xi,
            controls,
            snapshots,
            diagnostics,
            history,
            loops,
            blow_up: None,
            final_state: state0,
            accepted_steps: 0,
            rejected_steps: 0,
        });
    }

    let dt_max = config.effective_dt_max();
    let k_dim = config.noise_dim();
    let lift = if k_dim > 0 {
        let path = build_driver_path(config, k_dim, seed_override)?;
        Some(GeometricRoughPathGrid::canonical_lift(
            &path.refine_max_dt(dt_max),
        ))
    } else {
        None
    };
    // With no noise the partition is the uniform dt_max grid.
    let times: Vec<f64> = match &lift {
        Some(l) => l.times().to_vec(),
        None => {
            let m = (config.t_final / dt_max).ceil().max(1.0) as usize;
            (0..=m)
                .map(|i| config.t_final * i as f64 / m as f64)
                .collect()
        }
    };
    let m = times.len() - 1;
    let dx = grid.spacing();
    let ceiling = config.blowup_factor * diagnostics[0].linf_vort;

    let mut state = state0;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut i = 0usize;
    while i < m {
        // Largest span within dt_max; singles are always admissible.
        let mut j = i + 1;
        while j < m && times[j + 1] - times[i] <= dt_max * (1.0 + 1e-12) {
            j += 1;
        }
        let (z, zz, dt) = loop {
            let dt = times[j] - times[i];
            let inc = match &lift {
                Some(l) => l.increment(i, j)?,
                None => Increment::zero(1),
            };
            let mut rejection = None;
            if lift.is_some() {
                let proxy = inc.z_norm().powf(config.p) + inc.zz_norm().powf(config.p / 2.0);
                if proxy > config.l_step {
                    rejection = Some(StepRejection::RoughnessExceeded {
                        proxy,
                        limit: config.l_step,
                    });
                }
            }
            if rejection.is_none() {
                let speed_dt = state.u.max_speed() * dt;
                let limit = config.cfl * dx;
                if speed_dt > limit {
                    rejection = Some(StepRejection::CflExceeded { speed_dt, limit });
                }
            }
            match rejection {
                None => break (inc.z, inc.zz, dt),
                Some(reason) => {
                    rejected += 1;
                    if j > i + 1 {
                        j = i + (j - i + 1) / 2;
                    } else {
                        return Err(SolverError::UnsplittableStep {
                            s: times[i],
                            t: times[j],
                            reason,
                        });
                    }
                }
            }
        };

        if config.record_history {
            history.push(StepRecord {
                s: times[i],
                t: times[j],
                z: z.clone(),
                zz: zz.clone(),
                omega_left: state.omega.clone(),
            });
        }
        let u_left = state.u.clone();
        state = state.advance(&xi, &z, &zz, dt, controls)?;
        // Pin the clock to the grid to keep downstream comparisons exact.
        state.t = times[j];
        for l in &mut loops {
            crate::lagrangian::tracer_step(&mut l.positions, &u_left, &noise, &z, &zz, dt);
        }
        accepted += 1;
        i = j;

        let at_end = i == m;
        if accepted % config.diag_every.max(1) == 0 || at_end {
            diagnostics.push(diag_row(&state, circulations(&state, &loops)));
        }
        if (config.snapshot_every > 0 && accepted % config.snapshot_every == 0 && !at_end)
            || at_end
        {
            snapshots.push((state.t, state.omega.clone()));
        }
        if ceiling > 0.0 && state.omega.linf_norm() > ceiling {
            let report = BlowUpReport {
                t: state.t,
                linf: state.omega.linf_norm(),
                ceiling,
                bkm_integral: state.bkm_integral,
            };
            return Ok(RunOutput {
                grid,
                xi,
                controls,
                snapshots,
                diagnostics,
                history,
                loops,
                blow_up: Some(report),
                final_state: state,
                accepted_steps: accepted,
                rejected_steps: rejected,
            });
        }
    }

    Ok(RunOutput {
        grid,
        xi,
        controls,
        snapshots,
        diagnostics,
        history,
        loops,
        blow_up: None,
        final_state: state,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Inverts ∇q for the unique mean-free q: q̂(n) = −i n·ĝ(n)/|n|².
pub fn invert_gradient(g: &VectorField) -> ScalarField {
    use num_complex::Complex64;
    let grid = g.grid();
    let n = grid.size();
    let s1 = g.u1.spectral();
    let s2 = g.u2.spectral();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.num_nodes()];
    for j in 0..n {
        let n2 = grid.wavenumber(j) as f64;
        for i in 0..n {
            let n1 = grid.wavenumber(i) as f64;
            let k2 = n1 * n1 + n2 * n2;
            if k2 == 0.0 {
                continue;
            }
            let idx = j * n + i;
            let ndotg = n1 * s1[idx] + n2 * s2[idx];
            out[idx] = Complex64::new(0.0, -1.0) * ndotg / k2;
        }
    }
    ScalarField::from_spectral(grid, out)
}

/// Time series of recovered pressure and harmonic constant, rebuilt from
/// the recorded step history by left-endpoint compensated sums.
pub struct PressureSeries {
    pub times: Vec<f64>,
    pub q: Vec<ScalarField>,
    pub h: Vec<[f64; 2]>,
}

pub fn recover_pressure_harmonic(
    history: &[StepRecord],
    xi: &[VectorField],
    grid: SpectralGrid,
) -> Result<PressureSeries, SolverError> {
    if history.is_empty() {
        return Err(SolverError::Config(
            "pressure recovery needs a recorded step history".into(),
        ));
    }
    let mut times = vec![history[0].s];
    let mut grad_q = VectorField::zeros(grid);
    let mut h = [0.0_f64; 2];
    let mut q = vec![ScalarField::zeros(grid)];
    let mut hs = vec![h];
    for rec in history {
        let u = biot_savart_2d(&rec.omega_left);
        let conv = VectorField {
            u1: advect_scalar(&u, &u.u1),
            u2: advect_scalar(&u, &u.u2),
        };
        let dt = rec.t - rec.s;
        let mut dq = gradient_project(&conv).scaled(-dt);
        if !xi.is_empty() {
            let germ = adjoint_transport_germ(&u, xi, &rec.z, &rec.zz)?;
            dq = dq.add(&gradient_project(&germ));
            let germ_h = harmonic_part(&germ);
            h[0] += germ_h[0];
            h[1] += germ_h[1];
        }
        grad_q = grad_q.add(&dq);
        times.push(rec.t);
        q.push(invert_gradient(&grad_q));
        hs.push(h);
    }
    Ok(PressureSeries { times, q, h: hs })
}

/// One step of the projected velocity expansion; cross-check path, not
/// the production stepper.
pub fn velocity_form_step(
    u: &VectorField,
    xi: &[VectorField],
    z: &[f64],
    zz: &[f64],
    dt: f64,
    controls: StepControls,
) -> Result<VectorField, SpectralError> {
    let drift = |v: &VectorField| {
        let conv = VectorField {
            u1: advect_scalar(v, &v.u1),
            u2: advect_scalar(v, &v.u2),
        };
        leray_project(&conv).scaled(-1.0)
    };
    let rk4 = |v: &VectorField, h: f64| {
        let k1 = drift(v);
        let k2 = drift(&v.axpy(0.5 * h, &k1));
        let k3 = drift(&v.axpy(0.5 * h, &k2));
        let k4 = drift(&v.axpy(h, &k3));
        let mut out = v.axpy(h / 6.0, &k1);
        out = out.axpy(h / 3.0, &k2);
        out = out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4)
    };
    let k_dim = xi.len();
    let mut v = u.clone();
    if !controls.disable_drift && dt != 0.0 {
        v = rk4(&v, 0.5 * dt);
    }
    if k_dim > 0 {
        let adj: Vec<VectorField> = xi
            .iter()
            .map(|f| lie_adjoint(f, &v))
            .collect::<Result<_, _>>()?;
        let mut kick = VectorField::zeros(u.grid());
        for (k, a) in adj.iter().enumerate() {
            kick = kick.axpy(z[k], &leray_project(a));
        }
        if controls.second_level {
            for (l, a) in adj.iter().enumerate() {
                let projected = leray_project(a);
                for (k, xi_k) in xi.iter().enumerate() {
                    let coeff = zz[l * k_dim + k];
                    if coeff != 0.0 {
                        kick = kick.axpy(coeff, &leray_project(&lie_adjoint(xi_k, &projected)?));
                    }
                }
            }
        }
        v = v.add(&kick);
    }
    if !controls.disable_drift && dt != 0.0 {
        v = rk4(&v, 0.5 * dt);
    }
    Ok(leray_project(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{curl2d, divergence, gradient};

    fn grid() -> SpectralGrid {
        SpectralGrid::new(64).unwrap()
    }

    fn constant_xi(grid: SpectralGrid, a: [f64; 2]) -> VectorField {
        VectorField::new(
            ScalarField::from_fn(grid, |_, _| a[0]),
            ScalarField::from_fn(grid, |_, _| a[1]),
        )
        .unwrap()
    }

    fn shear_xi(grid: SpectralGrid, amp: f64, mode: i32) -> VectorField {
        // ∇⊥ of a single-mode stream function: solenoidal by construction.
        let psi = ScalarField::from_fn(grid, |x1, x2| {
            amp * (mode as f64 * x1).cos() * (mode as f64 * x2).sin()
        });
        let g = gradient(&psi);
        VectorField::new(g.u2.scaled(-1.0), g.u1).unwrap()
    }

    fn base_config() -> SolverConfig {
        SolverConfig {
            grid_n: 64,
            t_final: 1.0,
            dt_max: None,
            cfl: 0.5,
            l_step: 0.1,
            p: 2.5,
            xi: vec![],
            driver: DriverSpec::Brownian { level: 3, seed: 1 },
            init: InitSpec::TaylorGreen { amp: 1.0 },
            diag_every: 1,
            snapshot_every: 0,
            loops: vec![],
            blowup_factor: 1e3,
            disable_drift: false,
            disable_second_level: false,
            record_history: false,
            track_pressure: true,
        }
    }

    #[test]
    fn drift_rhs_vanishes_on_steady_states() {
        let tg = taylor_green_vorticity(grid(), 1.0);
        assert!(drift_rhs(&tg).linf_norm() < 1e-12);
        assert!(drift_rhs(&ScalarField::zeros(grid())).linf_norm() == 0.0);
        let single = ScalarField::from_fn(grid(), |x1, _| x1.cos());
        assert!(drift_rhs(&single).linf_norm() < 1e-12);
    }

    #[test]
    fn rough_increment_zero_increments() {
        let w = taylor_green_vorticity(grid(), 1.0);
        let xi = vec![shear_xi(grid(), 0.5, 1)];
        let out = rough_increment(&w, &xi, &[0.0], &[0.0], true);
        assert!(out.linf_norm() < 1e-14);
        let zero = rough_increment(&ScalarField::zeros(grid()), &xi, &[0.3], &[0.045], true);
        assert!(zero.linf_norm() < 1e-14);
    }

    #[test]
    fn rough_increment_constant_xi_matches_taylor_expansion() {
        let a = 0.7;
        let z = 0.31;
        let w = ScalarField::from_fn(grid(), |x1, _| x1.cos());
        let xi = vec![constant_xi(grid(), [a, 0.0])];
        let out = rough_increment(&w, &xi, &[z], &[0.5 * z * z], true);
        let expected = ScalarField::from_fn(grid(), |x1, _| {
            a * z * x1.sin() - 0.5 * a * a * z * z * x1.cos()
        });
        let err = out
            .values()
            .iter()
            .zip(expected.values())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn step_preserves_taylor_green_without_noise() {
        let w0 = taylor_green_vorticity(grid(), 1.0);
        let w1 = strang_step(&w0, &[], &[], &[], 1e-3, StepControls::default());
        let err = w1
            .values()
            .iter()
            .zip(w0.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-8, "per-step drift {err}");
    }

    #[test]
    fn zero_vorticity_stays_zero() {
        let w0 = ScalarField::zeros(grid());
        let xi = vec![shear_xi(grid(), 0.4, 2)];
        let w1 = strang_step(&w0, &xi, &[0.2], &[0.02], 1e-2, StepControls::default());
        assert!(w1.linf_norm() == 0.0);
    }

    #[test]
    fn drift_disabled_constant_xi_is_third_order_translation() {
        let a = 0.9;
        let w0 = ScalarField::from_fn(grid(), |x1, _| x1.cos());
        let xi = vec![constant_xi(grid(), [a, 0.0])];
        let controls = StepControls {
            disable_drift: true,
            second_level: true,
            track_pressure: false,
        };
        for z in [0.2, 0.1] {
            let w1 = strang_step(&w0, &xi, &[z], &[0.5 * z * z], 0.0, controls);
            let exact = ScalarField::from_fn(grid(), |x1, _| (x1 - a * z).cos());
            let err = w1
                .values()
                .iter()
                .zip(exact.values())
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            // Davie remainder for constant coefficients: (aZ)³/6.
            assert!(err <= (a * z).powi(3) / 6.0 * 1.05, "z={z} err {err}");
            assert!(err >= (a * z).powi(3) / 6.0 * 0.5, "z={z} err {err}");
        }
    }

    #[test]
    fn run_taylor_green_no_noise_conserves_l2() {
        let mut config = base_config();
        config.dt_max = Some(1e-2);
        let out = run(&config).unwrap();
        let l2_0 = out.diagnostics[0].l2_vort;
        for row in &out.diagnostics {
            assert!((row.l2_vort - l2_0).abs() / l2_0 <= 1e-6);
        }
        assert!(out.blow_up.is_none());
        assert!(out.accepted_steps >= 100);
    }

    #[test]
    fn run_zero_horizon_returns_initial_snapshot() {
        let mut config = base_config();
        config.t_final = 0.0;
        let out = run(&config).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.accepted_steps, 0);
        let tg = taylor_green_vorticity(grid(), 1.0);
        let err = out.snapshots[0]
            .1
            .values()
            .iter()
            .zip(tg.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);
    }

    #[test]
    fn brownian_run_conserves_l2_short_horizon() {
        let mut config = base_config();
        config.t_final = 0.25;
        config.dt_max = Some(0.25 / 64.0);
        config.driver = DriverSpec::Brownian { level: 6, seed: 4 };
        config.xi = vec![XiSpec {
            modes: vec![XiMode {
                n: [1, 0],
                coeff_cos: [0.0, 0.3],
                coeff_sin: [0.0, 0.0],
            }],
        }];
        let out = run(&config).unwrap();
        let l2_0 = out.diagnostics[0].l2_vort;
        for row in &out.diagnostics {
            assert!((row.l2_vort - l2_0).abs() / l2_0 <= 1e-5);
            assert!(row.l2_vort.is_finite());
        }
        // Mean-free and solenoidal along the way.
        assert!(out.final_state.omega.mean().abs() < 1e-13);
        assert!(divergence(&out.final_state.u).linf_norm() < 1e-10);
        let recon = biot_savart_2d(&out.final_state.omega);
        let err = curl2d(&recon)
            .values()
            .iter()
            .zip(out.final_state.omega.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10);
    }

    #[test]
    fn pressure_recovery_steady_taylor_green() {
        let mut config = base_config();
        config.t_final = 0.5;
        config.dt_max = Some(0.5 / 64.0);
        config.record_history = true;
        let out = run(&config).unwrap();
        let series = recover_pressure_harmonic(&out.history, &out.xi, out.grid).unwrap();
        let t_end = *series.times.last().unwrap();
        // Steady state: ∇q_t = −t Q(u·∇u), i.e. q_t = −(t/4)(cos 2x₁ + cos 2x₂).
        let expected = ScalarField::from_fn(grid(), |x1, x2| {
            -(t_end / 4.0) * ((2.0 * x1).cos() + (2.0 * x2).cos())
        });
        let q_end = series.q.last().unwrap();
        let err = q_end
            .values()
            .iter()
            .zip(expected.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "pressure error {err}");
        let h_end = series.h.last().unwrap();
        assert!(h_end[0].abs() < 1e-12 && h_end[1].abs() < 1e-12);
    }

    #[test]
    fn pressure_zero_velocity() {
        let history = vec![StepRecord {
            s: 0.0,
            t: 0.1,
            z: vec![0.1],
            zz: vec![0.005],
            omega_left: ScalarField::zeros(grid()),
        }];
        let xi = vec![shear_xi(grid(), 0.5, 1)];
        let series = recover_pressure_harmonic(&history, &xi, grid()).unwrap();
        assert!(series.q.last().unwrap().linf_norm() < 1e-14);
        assert_eq!(*series.h.last().unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn harmonic_constant_vanishes_for_constant_xi() {
        let u = biot_savart_2d(&taylor_green_vorticity(grid(), 1.0));
        let xi = vec![constant_xi(grid(), [0.8, -0.2])];
        let germ = adjoint_transport_germ(&u, &xi, &[0.37], &[0.0685]).unwrap();
        let h = harmonic_part(&germ);
        assert!(h[0].abs() < 1e-13 && h[1].abs() < 1e-13);
    }

    #[test]
    fn velocity_form_step_matches_vorticity_step() {
        let w0 = taylor_green_vorticity(grid(), 1.0)
            .add(&random_band_limited(grid(), 8, 6, 0.2))
            .zero_mean();
        let w0 = dealias(&w0);
        let u0 = biot_savart_2d(&w0);
        let xi = vec![shear_xi(grid(), 0.4, 1), shear_xi(grid(), 0.3, 2)];
        let z = [0.12, -0.07];
        let zz = [0.0072, 0.01, -0.0184, 0.00245];
        let dt = 0.01;
        let controls = StepControls::default();
        let u1 = velocity_form_step(&u0, &xi, &z, &zz, dt, controls).unwrap();
        let w1 = strang_step(&w0, &xi, &z, &zz, dt, controls);
        let err = curl2d(&u1)
            .values()
            .iter()
            .zip(w1.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        // The two routes are conjugate under curl at the discrete level;
        // the bound is far inside the O(dt³) headroom.
        assert!(err <= 1e-10, "curl mismatch {err}");
    }

    #[test]
    fn velocity_form_zero_is_fixed_point() {
        let xi = vec![shear_xi(grid(), 0.4, 1)];
        let u = velocity_form_step(
            &VectorField::zeros(grid()),
            &xi,
            &[0.3],
            &[0.045],
            0.05,
            StepControls::default(),
        )
        .unwrap();
        assert!(u.u1.linf_norm() == 0.0 && u.u2.linf_norm() == 0.0);
    }

    #[test]
    fn roughness_threshold_bisects_spans() {
        // Spans of several intervals break the proxy bound; singles fit.
        let mut config = base_config();
        config.xi = vec![XiSpec {
            modes: vec![XiMode {
                n: [1, 0],
                coeff_cos: [0.0, 0.2],
                coeff_sin: [0.0, 0.0],
            }],
        }];
        config.driver = DriverSpec::Smooth {
            name: "linear".into(),
            segments: 64,
        };
        config.t_final = 1.0;
        config.dt_max = Some(0.1);
        config.l_step = 2e-3;
        let out = run(&config).unwrap();
        assert!(out.rejected_steps >= 1, "no rejections happened");
        assert!(out.accepted_steps > 10);
        assert!(out.blow_up.is_none());
    }

    #[test]
    fn unsplittable_step_is_reported() {
        // A single driver interval that still violates CFL cannot be
        // subdivided further.
        let mut config = base_config();
        config.init = InitSpec::TaylorGreen { amp: 6.0 };
        config.driver = DriverSpec::Smooth {
            name: "linear".into(),
            segments: 8,
        };
        config.xi = vec![XiSpec {
            modes: vec![XiMode {
                n: [1, 0],
                coeff_cos: [0.0, 0.1],
                coeff_sin: [0.0, 0.0],
            }],
        }];
        config.dt_max = Some(0.5);
        let err = run(&config).unwrap_err();
        assert!(matches!(
            err,
            SolverError::UnsplittableStep {
                reason: StepRejection::CflExceeded { .. },
                ..
            }
        ));
    }

    #[test]
    fn config_validation_messages() {
        let mut config = base_config();
        config.grid_n = 63;
        let msg = config.validate().unwrap_err().to_string();
        assert!(msg.contains("grid_n must be even"), "{msg}");
        config.grid_n = 64;
        config.p = 3.5;
        let msg = config.validate().unwrap_err().to_string();
        assert!(msg.contains("p in [2,3)"), "{msg}");
        config.p = 2.5;
        assert!(config.validate().is_ok());
    }
}
