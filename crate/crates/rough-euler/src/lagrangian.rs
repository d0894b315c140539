//! Particle and flow-map diagnostics: rough tracer integration, Kelvin
//! circulation along advected loops, and the vorticity push-forward
//! check.
//!
//! Off-grid velocities are evaluated by direct summation of the
//! band-limited Fourier series rather than interpolation, so the only
//! error terms in the invariant tests come from time discretisation.

use num_complex::Complex64;
use thiserror::Error;

use crate::solver::{RunOutput, SolverError, StepRecord};
use crate::spectral::{advect_scalar, biot_savart_2d, ScalarField, VectorField, TWO_PI};

#[derive(Debug, Error)]
pub enum LagrangianError {
    #[error("loop must have >= 8 points, got {0}")]
    LoopTooSmall(usize),
    #[error("degenerate loop: consecutive points {0} and {1} coincide")]
    DegenerateLoop(usize, usize),
    #[error("no recorded step history; run with record_history = true")]
    MissingHistory,
    #[error("time {0} is not a step boundary of the recorded history")]
    NotAStepBoundary(f64),
    #[error(transparent)]
    Solver(#[from] Box<SolverError>),
}

/// Direct evaluator of a band-limited scalar field at arbitrary points.
pub struct FieldEvaluator {
    max_mode: i32,
    /// (n₁, n₂, coefficient) for the modes retained.
    modes: Vec<(i32, i32, Complex64)>,
}

/// Coefficients below 1e−16 of the largest are transform round-off, not
/// signal; dropping them changes point values by well under 1e−12.
const MODE_DROP_REL_SQ: f64 = 1e-32;

impl FieldEvaluator {
    pub fn new(f: &ScalarField) -> Self {
        let grid = f.grid();
        let n = grid.size();
        let spec = f.spectral();
        let peak = spec.iter().fold(0.0_f64, |m, c| m.max(c.norm_sqr()));
        let floor = peak * MODE_DROP_REL_SQ;
        let mut modes = Vec::new();
        let mut max_mode = 0;
        for j in 0..n {
            let n2 = grid.wavenumber(j);
            for i in 0..n {
                let n1 = grid.wavenumber(i);
                let c = spec[j * n + i];
                if c.norm_sqr() > floor {
                    modes.push((n1, n2, c));
                    max_mode = max_mode.max(n1.abs()).max(n2.abs());
                }
            }
        }
        Self { max_mode, modes }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let t1 = phase_table(x[0], self.max_mode);
        let t2 = phase_table(x[1], self.max_mode);
        self.eval_with_tables(&t1, &t2, self.max_mode)
    }

    /// Tables must cover exponents [−center, center] with `center ≥
    /// self.max_mode`; entry q holds e^{i (q − center) x}.
    fn eval_with_tables(&self, t1: &[Complex64], t2: &[Complex64], center: i32) -> f64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for &(n1, n2, c) in &self.modes {
            sum += c * t1[(n1 + center) as usize] * t2[(n2 + center) as usize];
        }
        sum.re
    }
}

fn phase_table(coord: f64, max_mode: i32) -> Vec<Complex64> {
    (-max_mode..=max_mode)
        .map(|k| Complex64::from_polar(1.0, k as f64 * coord))
        .collect()
}

/// Paired evaluator for the two components of a velocity field.
pub struct VelocityEvaluator {
    e1: FieldEvaluator,
    e2: FieldEvaluator,
    max_mode: i32,
}

impl VelocityEvaluator {
    pub fn new(u: &VectorField) -> Self {
        let e1 = FieldEvaluator::new(&u.u1);
        let e2 = FieldEvaluator::new(&u.u2);
        let max_mode = e1.max_mode.max(e2.max_mode);
        Self { e1, e2, max_mode }
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let t1 = phase_table(x[0], self.max_mode);
        let t2 = phase_table(x[1], self.max_mode);
        [
            self.e1.eval_with_tables(&t1, &t2, self.max_mode),
            self.e2.eval_with_tables(&t1, &t2, self.max_mode),
        ]
    }
}

/// Exact trigonometric evaluation of a velocity field at a batch of
/// points; chunks across worker threads for large batches.
pub fn eval_velocity_at(u: &VectorField, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let evaluator = VelocityEvaluator::new(u);
    eval_batch(&evaluator, points)
}

fn eval_batch(evaluator: &VelocityEvaluator, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let workers = crate::worker_threads();
    if points.len() < 512 || workers <= 1 {
        return points.iter().map(|&x| evaluator.eval(x)).collect();
    }
    let chunk = points.len().div_ceil(workers);
    let mut out = vec![[0.0; 2]; points.len()];
    std::thread::scope(|scope| {
        for (slot, pts) in out.chunks_mut(chunk).zip(points.chunks(chunk)) {
            scope.spawn(move || {
                for (o, &x) in slot.iter_mut().zip(pts) {
                    *o = evaluator.eval(x);
                }
            });
        }
    });
    out
}

/// Precomputed noise-field evaluators for tracer stepping: the fields
/// ξ_k themselves and the Davie correction fields ξ_l·∇ξ_k.
pub struct NoiseFields {
    pub dim: usize,
    xi: Vec<VelocityEvaluator>,
    /// Entry l·K + k holds ξ_l·∇ξ_k.
    grad_corr: Vec<VelocityEvaluator>,
}

impl NoiseFields {
    pub fn new(xi: &[VectorField]) -> Self {
        let evals = xi.iter().map(VelocityEvaluator::new).collect();
        let mut grad_corr = Vec::with_capacity(xi.len() * xi.len());
        for xi_l in xi {
            for xi_k in xi {
                let field = VectorField {
                    u1: advect_scalar(xi_l, &xi_k.u1),
                    u2: advect_scalar(xi_l, &xi_k.u2),
                };
                grad_corr.push(VelocityEvaluator::new(&field));
            }
        }
        Self {
            dim: xi.len(),
            xi: evals,
            grad_corr,
        }
    }

    /// Rough displacement at x: Σ_k ξ_k(x) z^k + Σ_{l,k} (ξ_l·∇ξ_k)(x) 𝕫^{lk}.
    fn kick(&self, x: [f64; 2], z: &[f64], zz: &[f64]) -> [f64; 2] {
        let mut d = [0.0; 2];
        for (k, e) in self.xi.iter().enumerate() {
            if z[k] != 0.0 {
                let v = e.eval(x);
                d[0] += v[0] * z[k];
                d[1] += v[1] * z[k];
            }
        }
        for l in 0..self.dim {
            for k in 0..self.dim {
                let coeff = zz[l * self.dim + k];
                if coeff != 0.0 {
                    let v = self.grad_corr[l * self.dim + k].eval(x);
                    d[0] += v[0] * coeff;
                    d[1] += v[1] * coeff;
                }
            }
        }
        d
    }
}

fn wrap(x: f64) -> f64 {
    x.rem_euclid(TWO_PI)
}

/// One Davie tracer step: x ↦ x + u_s(x)Δt + ξ_k(x)Z^k + (ξ_l·∇ξ_k)(x)𝕫^{lk},
/// wrapped into [0,2π)².
pub fn tracer_step(
    positions: &mut [[f64; 2]],
    u_s: &VectorField,
    noise: &NoiseFields,
    z: &[f64],
    zz: &[f64],
    dt: f64,
) {
    let u_eval = VelocityEvaluator::new(u_s);
    let drifts = eval_batch(&u_eval, positions);
    for (x, v) in positions.iter_mut().zip(drifts) {
        let kick = if noise.dim > 0 {
            noise.kick(*x, z, zz)
        } else {
            [0.0; 2]
        };
        x[0] = wrap(x[0] + v[0] * dt + kick[0]);
        x[1] = wrap(x[1] + v[1] * dt + kick[1]);
    }
}

/// Ordered closed circular loop, counter-clockwise.
pub fn circle_loop(center: [f64; 2], radius: f64, points: usize) -> Vec<[f64; 2]> {
    (0..points)
        .map(|i| {
            let theta = TWO_PI * i as f64 / points as f64;
            [
                wrap(center[0] + radius * theta.cos()),
                wrap(center[1] + radius * theta.sin()),
            ]
        })
        .collect()
}

/// Minimal-image difference: each component mapped into (−π, π].
fn minimal_image(d: f64) -> f64 {
    d - TWO_PI * (d / TWO_PI).round()
}

/// Trapezoid quadrature of ∮ u·dl over the closed polygon, with
/// periodic minimal-image edges; edges must stay shorter than π per
/// component for the image rule to be unambiguous.
pub fn circulation(positions: &[[f64; 2]], u: &VectorField) -> Result<f64, LagrangianError> {
    if positions.len() < 8 {
        return Err(LagrangianError::LoopTooSmall(positions.len()));
    }
    let m = positions.len();
    for i in 0..m {
        let j = (i + 1) % m;
        if positions[i] == positions[j] {
            return Err(LagrangianError::DegenerateLoop(i, j));
        }
    }
    let velocities = eval_velocity_at(u, positions);
    let mut total = 0.0;
    for i in 0..m {
        let j = (i + 1) % m;
        let d = [
            minimal_image(positions[j][0] - positions[i][0]),
            minimal_image(positions[j][1] - positions[i][1]),
        ];
        let v = [
            0.5 * (velocities[i][0] + velocities[j][0]),
            0.5 * (velocities[i][1] + velocities[j][1]),
        ];
        total += v[0] * d[0] + v[1] * d[1];
    }
    Ok(total)
}

/// Structured particle lattice at time t together with its time-0
/// preimage under the back-traced flow.
pub struct FlowSample {
    pub t: f64,
    pub lattice: Vec<[f64; 2]>,
    pub preimage: Vec<[f64; 2]>,
}

fn heun_drift(points: &mut [[f64; 2]], eval: &VelocityEvaluator, dt: f64) {
    let k1 = eval_batch(eval, points);
    let predictor: Vec<[f64; 2]> = points
        .iter()
        .zip(&k1)
        .map(|(x, v)| [wrap(x[0] + v[0] * dt), wrap(x[1] + v[1] * dt)])
        .collect();
    let k2 = eval_batch(eval, &predictor);
    for ((x, v1), v2) in points.iter_mut().zip(&k1).zip(&k2) {
        x[0] = wrap(x[0] + 0.5 * dt * (v1[0] + v2[0]));
        x[1] = wrap(x[1] + 0.5 * dt * (v1[1] + v2[1]));
    }
}

/// Integrates a lattice backwards from `t_target` to 0 through the
/// recorded step sequence and returns the flow sample. Each reversed
/// step mirrors the forward Strang structure: half drift at the later
/// velocity, inverse rough kick with (−Z, 𝕫ᵀ), half drift at the
/// earlier velocity; drift halves use Heun stages.
pub fn back_trace_flow(
    run: &RunOutput,
    lattice_n: usize,
    t_target: f64,
) -> Result<FlowSample, LagrangianError> {
    if run.history.is_empty() {
        return Err(LagrangianError::MissingHistory);
    }
    let idx = run
        .history
        .iter()
        .position(|rec| (rec.t - t_target).abs() <= 1e-12 * (1.0 + t_target.abs()))
        .ok_or(LagrangianError::NotAStepBoundary(t_target))?;

    let h = TWO_PI / lattice_n as f64;
    let lattice: Vec<[f64; 2]> = (0..lattice_n * lattice_n)
        .map(|q| {
            let i = q % lattice_n;
            let j = q / lattice_n;
            [i as f64 * h, j as f64 * h]
        })
        .collect();
    let mut points = lattice.clone();

    let noise = NoiseFields::new(&run.xi);
    let k_dim = run.xi.len();
    // Velocity at the right endpoint of step r is the left endpoint of
    // step r+1; the final state covers the last record.
    let u_right = |r: usize| -> VectorField {
        if r + 1 < run.history.len() {
            biot_savart_2d(&run.history[r + 1].omega_left)
        } else {
            run.final_state.u.clone()
        }
    };

    let with_drift = !run.controls.disable_drift;
    for r in (0..=idx).rev() {
        let rec: &StepRecord = &run.history[r];
        let dt = rec.t - rec.s;
        if with_drift {
            heun_drift(&mut points, &VelocityEvaluator::new(&u_right(r)), -0.5 * dt);
        }
        if k_dim > 0 {
            let z_rev: Vec<f64> = rec.z.iter().map(|v| -v).collect();
            let mut zz_rev = vec![0.0; k_dim * k_dim];
            for l in 0..k_dim {
                for k in 0..k_dim {
                    zz_rev[l * k_dim + k] = rec.z[l] * rec.z[k] - rec.zz[l * k_dim + k];
                }
            }
            for x in points.iter_mut() {
                let kick = noise.kick(*x, &z_rev, &zz_rev);
                x[0] = wrap(x[0] + kick[0]);
                x[1] = wrap(x[1] + kick[1]);
            }
        }
        if with_drift {
            let u_s = biot_savart_2d(&rec.omega_left);
            heun_drift(&mut points, &VelocityEvaluator::new(&u_s), -0.5 * dt);
        }
    }

    Ok(FlowSample {
        t: t_target,
        lattice,
        preimage: points,
    })
}

/// Push-forward representation check: sup over a lattice of
/// |ω̃_t(x) − ω̃₀(φ_t⁻¹(x))|.
pub fn back_trace_vorticity_check(
    run: &RunOutput,
    lattice_n: usize,
    t_target: f64,
) -> Result<f64, LagrangianError> {
    if run.history.is_empty() {
        if t_target == 0.0 {
            return Ok(0.0);
        }
        return Err(LagrangianError::MissingHistory);
    }
    if t_target == 0.0 {
        return Ok(0.0);
    }
    let sample = back_trace_flow(run, lattice_n, t_target)?;
    let idx = run
        .history
        .iter()
        .position(|rec| (rec.t - t_target).abs() <= 1e-12 * (1.0 + t_target.abs()))
        .unwrap();
    let omega_t = if idx + 1 < run.history.len() {
        run.history[idx + 1].omega_left.clone()
    } else {
        run.final_state.omega.clone()
    };
    let omega0 = &run.history[0].omega_left;
    let eval_t = FieldEvaluator::new(&omega_t);
    let eval_0 = FieldEvaluator::new(omega0);
    let mut sup = 0.0_f64;
    for (x, y) in sample.lattice.iter().zip(&sample.preimage) {
        let defect = (eval_t.eval(*x) - eval_0.eval(*y)).abs();
        sup = sup.max(defect);
    }
    Ok(sup)
}
