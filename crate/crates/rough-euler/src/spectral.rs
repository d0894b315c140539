//! Real periodic fields on the torus [0,2π)² with spectral operators.
//!
//! Fields carry their physical N×N samples (x₁ fastest) and lazily cache
//! the full complex spectrum f̂(n), n ∈ {−N/2,…,N/2−1}². All derivative
//! multipliers zero the Nyquist mode n = −N/2, and every nonlinear
//! product is followed by 2/3-rule dealiasing at cutoff ⌊N/3⌋. Inner
//! products use the normalized measure dV = dx/(2π)², under which the
//! grid sum (1/N²)Σ f·g is the exact discrete Parseval pairing for
//! band-limited fields.

use num_complex::Complex64;
use once_cell::sync::{Lazy, OnceCell};
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

use crate::rough_path::GaussianStream;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("grid size must be even and >= 8, got {0}")]
    InvalidGridSize(usize),
    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(usize, usize),
    #[error("vector field must be solenoidal (max |div| = {0:.3e})")]
    NotSolenoidal(f64),
}

/// Uniform N×N grid on [0,2π)² with nodes x_{ij} = (2πi/N, 2πj/N).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralGrid {
    n: usize,
}

impl SpectralGrid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 8 || n % 2 != 0 {
            return Err(SpectralError::InvalidGridSize(n));
        }
        Ok(Self { n })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn dealias_cutoff(&self) -> i32 {
        (self.n / 3) as i32
    }

    /// Signed wavenumber of array index `a` along either axis.
    pub fn wavenumber(&self, a: usize) -> i32 {
        if a < self.n / 2 {
            a as i32
        } else {
            a as i32 - self.n as i32
        }
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }
}

struct GridPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLANS: Lazy<Mutex<HashMap<usize, Arc<GridPlans>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plans_for(n: usize) -> Arc<GridPlans> {
    let mut map = PLANS.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(GridPlans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for j in 0..n {
        for i in (j + 1)..n {
            buf.swap(j * n + i, i * n + j);
        }
    }
}

/// Forward 2D transform of real samples; output scaled by 1/N² so entries
/// are the Fourier coefficients in f(x) = Σ f̂(n) e^{i n·x}.
fn fft2_forward(n: usize, phys: &[f64]) -> Vec<Complex64> {
    let plans = plans_for(n);
    let mut buf: Vec<Complex64> = phys.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans.forward.process(&mut buf);
    transpose(&mut buf, n);
    plans.forward.process(&mut buf);
    transpose(&mut buf, n);
    let scale = 1.0 / (n * n) as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Inverse 2D transform; takes the real part.
fn fft2_inverse(n: usize, spec: &[Complex64]) -> Vec<f64> {
    let plans = plans_for(n);
    let mut buf = spec.to_vec();
    plans.inverse.process(&mut buf);
    transpose(&mut buf, n);
    plans.inverse.process(&mut buf);
    transpose(&mut buf, n);
    buf.iter().map(|v| v.re).collect()
}

/// Real scalar field on the torus grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: SpectralGrid,
    phys: Vec<f64>,
    spec: OnceCell<Vec<Complex64>>,
}

impl ScalarField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            phys: vec![0.0; grid.num_nodes()],
            spec: OnceCell::new(),
        }
    }

    pub fn from_physical(grid: SpectralGrid, phys: Vec<f64>) -> Self {
        assert_eq!(phys.len(), grid.num_nodes());
        Self {
            grid,
            phys,
            spec: OnceCell::new(),
        }
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.size();
        let mut phys = vec![0.0; grid.num_nodes()];
        for j in 0..n {
            for i in 0..n {
                let (x1, x2) = grid.node(i, j);
                phys[grid.index(i, j)] = f(x1, x2);
            }
        }
        Self::from_physical(grid, phys)
    }

    /// Builds the field from Fourier coefficients (real part of the
    /// inverse transform); the coefficients are cached as given.
    pub fn from_spectral(grid: SpectralGrid, spec: Vec<Complex64>) -> Self {
        assert_eq!(spec.len(), grid.num_nodes());
        let phys = fft2_inverse(grid.size(), &spec);
        let cell = OnceCell::new();
        let _ = cell.set(spec);
        Self {
            grid,
            phys,
            spec: cell,
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.phys
    }

    pub fn spectral(&self) -> &[Complex64] {
        self.spec
            .get_or_init(|| fft2_forward(self.grid.size(), &self.phys))
    }

    pub fn mean(&self) -> f64 {
        self.phys.iter().sum::<f64>() / self.grid.num_nodes() as f64
    }

    /// Copy with the zero mode removed exactly.
    pub fn zero_mean(&self) -> ScalarField {
        let m = self.mean();
        let phys = self.phys.iter().map(|v| v - m).collect();
        ScalarField::from_physical(self.grid, phys)
    }

    /// L² inner product under the normalized measure.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid);
        let dot: f64 = self.phys.iter().zip(&other.phys).map(|(a, b)| a * b).sum();
        dot / self.grid.num_nodes() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.linf_norm();
        }
        let sum: f64 = self.phys.iter().map(|v| v.abs().powf(p)).sum();
        (sum / self.grid.num_nodes() as f64).powf(1.0 / p)
    }

    pub fn linf_norm(&self) -> f64 {
        self.phys.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn h1_norm(&self) -> f64 {
        let n = self.grid.size();
        let spec = self.spectral();
        let mut sum = 0.0;
        for j in 0..n {
            let n2 = self.grid.wavenumber(j) as f64;
            for i in 0..n {
                let n1 = self.grid.wavenumber(i) as f64;
                sum += (1.0 + n1 * n1 + n2 * n2) * spec[j * n + i].norm_sqr();
            }
        }
        sum.sqrt()
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField::from_physical(self.grid, self.phys.iter().map(|v| a * v).collect())
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let phys = self.phys.iter().zip(&other.phys).map(|(a, b)| a + b).collect();
        ScalarField::from_physical(self.grid, phys)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let phys = self.phys.iter().zip(&other.phys).map(|(a, b)| a - b).collect();
        ScalarField::from_physical(self.grid, phys)
    }

    /// self + a·other, fused.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let phys = self
            .phys
            .iter()
            .zip(&other.phys)
            .map(|(x, y)| x + a * y)
            .collect();
        ScalarField::from_physical(self.grid, phys)
    }

    pub fn mul_pointwise(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        let phys = self.phys.iter().zip(&other.phys).map(|(a, b)| a * b).collect();
        ScalarField::from_physical(self.grid, phys)
    }
}

/// Vector field as two scalar components on the same grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self, SpectralError> {
        if u1.grid() != u2.grid() {
            return Err(SpectralError::GridMismatch(
                u1.grid().size(),
                u2.grid().size(),
            ));
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            u1: ScalarField::zeros(grid),
            u2: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        self.u1.grid()
    }

    /// Max over nodes of the Euclidean speed.
    pub fn max_speed(&self) -> f64 {
        self.u1
            .values()
            .iter()
            .zip(self.u2.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.u1.inner(&self.u1) + self.u2.inner(&self.u2)).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.u1.h1_norm().powi(2) + self.u2.h1_norm().powi(2)).sqrt()
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            u1: self.u1.add(&other.u1),
            u2: self.u2.add(&other.u2),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            u1: self.u1.sub(&other.u1),
            u2: self.u2.sub(&other.u2),
        }
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        VectorField {
            u1: self.u1.scaled(a),
            u2: self.u2.scaled(a),
        }
    }

    pub fn axpy(&self, a: f64, other: &VectorField) -> VectorField {
        VectorField {
            u1: self.u1.axpy(a, &other.u1),
            u2: self.u2.axpy(a, &other.u2),
        }
    }
}

/// Applies a spectral multiplier n ↦ m(n₁,n₂); Nyquist handling is the
/// caller's responsibility via the multiplier itself.
fn apply_multiplier(f: &ScalarField, m: impl Fn(i32, i32) -> Complex64) -> ScalarField {
    let grid = f.grid();
    let n = grid.size();
    let spec = f.spectral();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    for j in 0..n {
        let n2 = grid.wavenumber(j);
        for i in 0..n {
            let n1 = grid.wavenumber(i);
            out[j * n + i] = spec[j * n + i] * m(n1, n2);
        }
    }
    ScalarField::from_spectral(grid, out)
}

fn is_nyquist(grid: SpectralGrid, k: i32) -> bool {
    k == -(grid.size() as i32) / 2
}

fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let grid = f.grid();
    apply_multiplier(f, |n1, n2| {
        let k = if axis == 0 { n1 } else { n2 };
        if is_nyquist(grid, n1) || is_nyquist(grid, n2) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64)
        }
    })
}

/// (∂₁f, ∂₂f).
pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField {
        u1: derivative(f, 0),
        u2: derivative(f, 1),
    }
}

/// ∂₁u¹ + ∂₂u².
pub fn divergence(u: &VectorField) -> ScalarField {
    derivative(&u.u1, 0).add(&derivative(&u.u2, 1))
}

/// Scalar curl ∂₁u² − ∂₂u¹.
pub fn curl2d(u: &VectorField) -> ScalarField {
    derivative(&u.u2, 0).sub(&derivative(&u.u1, 1))
}

/// Mean-free solution g of −Δg = f − mean(f).
pub fn inverse_laplacian(f: &ScalarField) -> ScalarField {
    apply_multiplier(f, |n1, n2| {
        let k2 = (n1 * n1 + n2 * n2) as f64;
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / k2, 0.0)
        }
    })
}

/// Projection onto divergence-free mean-free fields:
/// û(n) ↦ û(n) − n (n·û(n))/|n|², û(0) ↦ 0.
pub fn leray_project(u: &VectorField) -> VectorField {
    let grid = u.grid();
    let n = grid.size();
    let s1 = u.u1.spectral();
    let s2 = u.u2.spectral();
    let mut o1 = vec![Complex64::new(0.0, 0.0); s1.len()];
    let mut o2 = vec![Complex64::new(0.0, 0.0); s2.len()];
    for j in 0..n {
        let n2 = grid.wavenumber(j) as f64;
        for i in 0..n {
            let n1 = grid.wavenumber(i) as f64;
            let k2 = n1 * n1 + n2 * n2;
            let idx = j * n + i;
            if k2 == 0.0 {
                continue;
            }
            let ndotu = (n1 * s1[idx] + n2 * s2[idx]) / k2;
            o1[idx] = s1[idx] - n1 * ndotu;
            o2[idx] = s2[idx] - n2 * ndotu;
        }
    }
    VectorField {
        u1: ScalarField::from_spectral(grid, o1),
        u2: ScalarField::from_spectral(grid, o2),
    }
}

/// Gradient-part projector Q = I − P − H: û(n) ↦ n (n·û(n))/|n|².
pub fn gradient_project(u: &VectorField) -> VectorField {
    let grid = u.grid();
    let n = grid.size();
    let s1 = u.u1.spectral();
    let s2 = u.u2.spectral();
    let mut o1 = vec![Complex64::new(0.0, 0.0); s1.len()];
    let mut o2 = vec![Complex64::new(0.0, 0.0); s2.len()];
    for j in 0..n {
        let n2 = grid.wavenumber(j) as f64;
        for i in 0..n {
            let n1 = grid.wavenumber(i) as f64;
            let k2 = n1 * n1 + n2 * n2;
            if k2 == 0.0 {
                continue;
            }
            let idx = j * n + i;
            let ndotu = (n1 * s1[idx] + n2 * s2[idx]) / k2;
            o1[idx] = n1 * ndotu;
            o2[idx] = n2 * ndotu;
        }
    }
    VectorField {
        u1: ScalarField::from_spectral(grid, o1),
        u2: ScalarField::from_spectral(grid, o2),
    }
}

/// Harmonic (constant) part H u = û(0) ∈ ℝ².
pub fn harmonic_part(u: &VectorField) -> [f64; 2] {
    [u.u1.mean(), u.u2.mean()]
}

/// Velocity from mean-free scalar vorticity: u = ∇⊥ψ with Δψ = w, i.e.
/// û(n) = (i n₂ ŵ, −i n₁ ŵ)/|n|². Then curl u = w, div u = 0, mean u = 0.
pub fn biot_savart_2d(w: &ScalarField) -> VectorField {
    let grid = w.grid();
    let n = grid.size();
    let s = w.spectral();
    let mut o1 = vec![Complex64::new(0.0, 0.0); s.len()];
    let mut o2 = vec![Complex64::new(0.0, 0.0); s.len()];
    for j in 0..n {
        let n2 = grid.wavenumber(j);
        for i in 0..n {
            let n1 = grid.wavenumber(i);
            let k2 = (n1 * n1 + n2 * n2) as f64;
            if k2 == 0.0 || is_nyquist(grid, n1) || is_nyquist(grid, n2) {
                continue;
            }
            let idx = j * n + i;
            let c = Complex64::new(0.0, 1.0) * s[idx] / k2;
            o1[idx] = c * n2 as f64;
            o2[idx] = -c * n1 as f64;
        }
    }
    VectorField {
        u1: ScalarField::from_spectral(grid, o1),
        u2: ScalarField::from_spectral(grid, o2),
    }
}

/// Zeroes all coefficients with max(|n₁|,|n₂|) above the 2/3-rule cutoff.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let cut = grid.dealias_cutoff();
    apply_multiplier(f, |n1, n2| {
        if n1.abs() > cut || n2.abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

pub fn dealias_vector(u: &VectorField) -> VectorField {
    VectorField {
        u1: dealias(&u.u1),
        u2: dealias(&u.u2),
    }
}

/// Transport term £_v f = v·∇f, dealiased.
pub fn advect_scalar(v: &VectorField, f: &ScalarField) -> ScalarField {
    assert_eq!(v.grid(), f.grid());
    let g = gradient(f);
    let prod = v.u1.mul_pointwise(&g.u1).add(&v.u2.mul_pointwise(&g.u2));
    dealias(&prod)
}

/// Vector Lie derivative £_ξ w = ξ·∇w − w·∇ξ, dealiased componentwise.
pub fn lie_vector(xi: &VectorField, w: &VectorField) -> VectorField {
    let conv = |comp: &ScalarField| {
        let g = gradient(comp);
        xi.u1.mul_pointwise(&g.u1).add(&xi.u2.mul_pointwise(&g.u2))
    };
    let gx1 = gradient(&xi.u1);
    let gx2 = gradient(&xi.u2);
    let back1 = w.u1.mul_pointwise(&gx1.u1).add(&w.u2.mul_pointwise(&gx1.u2));
    let back2 = w.u1.mul_pointwise(&gx2.u1).add(&w.u2.mul_pointwise(&gx2.u2));
    VectorField {
        u1: dealias(&conv(&w.u1).sub(&back1)),
        u2: dealias(&conv(&w.u2).sub(&back2)),
    }
}

const SOLENOIDAL_TOL: f64 = 1e-10;

/// Adjoint Lie transport for solenoidal ξ:
/// £*_ξ u = −(ξ·∇u^i + u^j ∂_i ξ^j) e_i, dealiased.
pub fn lie_adjoint(xi: &VectorField, u: &VectorField) -> Result<VectorField, SpectralError> {
    assert_eq!(xi.grid(), u.grid());
    let div = divergence(xi).linf_norm();
    if div > SOLENOIDAL_TOL {
        return Err(SpectralError::NotSolenoidal(div));
    }
    let conv = |comp: &ScalarField| {
        let g = gradient(comp);
        xi.u1.mul_pointwise(&g.u1).add(&xi.u2.mul_pointwise(&g.u2))
    };
    let gx1 = gradient(&xi.u1);
    let gx2 = gradient(&xi.u2);
    // u^j ∂_i ξ^j for i = 1, 2.
    let stretch1 = u.u1.mul_pointwise(&gx1.u1).add(&u.u2.mul_pointwise(&gx2.u1));
    let stretch2 = u.u1.mul_pointwise(&gx1.u2).add(&u.u2.mul_pointwise(&gx2.u2));
    Ok(VectorField {
        u1: dealias(&conv(&u.u1).add(&stretch1).scaled(-1.0)),
        u2: dealias(&conv(&u.u2).add(&stretch2).scaled(-1.0)),
    })
}

/// Sup-norm of the trigonometric polynomial, not just the grid max: the
/// two grid extrema are polished by Newton iterations on the spectral
/// gradient. The grid max alone understates a between-node extremum by
/// O(Δx²), which matters for conservation checks of |ω̃|_∞.
pub fn sup_norm(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let n = grid.size();
    let spec = f.spectral();
    let peak = spec.iter().fold(0.0_f64, |m, c| m.max(c.norm_sqr()));
    if peak == 0.0 {
        return 0.0;
    }
    let floor = peak * 1e-32;
    let mut modes: Vec<(f64, f64, Complex64)> = Vec::new();
    for j in 0..n {
        let n2 = grid.wavenumber(j) as f64;
        for i in 0..n {
            let n1 = grid.wavenumber(i) as f64;
            let c = spec[j * n + i];
            if c.norm_sqr() > floor {
                modes.push((n1, n2, c));
            }
        }
    }
    let eval = |x: [f64; 2]| -> (f64, [f64; 2], [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for &(n1, n2, c) in &modes {
            let e = Complex64::from_polar(1.0, n1 * x[0] + n2 * x[1]) * c;
            v += e.re;
            g[0] -= n1 * e.im;
            g[1] -= n2 * e.im;
            h[0] -= n1 * n1 * e.re;
            h[1] -= n1 * n2 * e.re;
            h[2] -= n2 * n2 * e.re;
        }
        (v, g, h)
    };

    let mut best = 0.0_f64;
    let mut arg_max = [0.0; 2];
    let mut arg_min = [0.0; 2];
    let (mut max_v, mut min_v) = (f64::MIN, f64::MAX);
    for j in 0..n {
        for i in 0..n {
            let v = f.phys[j * n + i];
            best = best.max(v.abs());
            if v > max_v {
                max_v = v;
                let (x1, x2) = grid.node(i, j);
                arg_max = [x1, x2];
            }
            if v < min_v {
                min_v = v;
                let (x1, x2) = grid.node(i, j);
                arg_min = [x1, x2];
            }
        }
    }

    let dx = grid.spacing();
    for start in [arg_max, arg_min] {
        let mut x = start;
        for _ in 0..6 {
            let (_, g, h) = eval(x);
            let det = h[0] * h[2] - h[1] * h[1];
            if det.abs() < 1e-14 {
                break;
            }
            let mut d = [
                (h[2] * g[0] - h[1] * g[1]) / det,
                (h[0] * g[1] - h[1] * g[0]) / det,
            ];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > dx {
                d[0] *= dx / len;
                d[1] *= dx / len;
            }
            x = [x[0] - d[0], x[1] - d[1]];
            if len < 1e-14 {
                break;
            }
        }
        let (v, _, _) = eval(x);
        best = best.max(v.abs());
    }
    best
}

/// Random mean-free band-limited field: Gaussian coefficients with mild
/// decay on modes max(|n₁|,|n₂|) ≤ max_mode, Hermitian-symmetrized, then
/// rescaled to the requested L² norm.
pub fn random_band_limited(
    grid: SpectralGrid,
    seed: u64,
    max_mode: i32,
    l2_amplitude: f64,
) -> ScalarField {
    let n = grid.size();
    let max_mode = max_mode.min(grid.dealias_cutoff()).max(1);
    let mut stream = GaussianStream::new(seed, 1000);
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.num_nodes()];
    let idx_of = |k1: i32, k2: i32| -> usize {
        let i = k1.rem_euclid(n as i32) as usize;
        let j = k2.rem_euclid(n as i32) as usize;
        j * n + i
    };
    for k2 in -max_mode..=max_mode {
        for k1 in -max_mode..=max_mode {
            // One draw per conjugate pair: take the upper half-plane.
            let upper = k2 > 0 || (k2 == 0 && k1 > 0);
            if !upper {
                continue;
            }
            let decay = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let c = Complex64::new(stream.next_gaussian(), stream.next_gaussian()) * decay;
            spec[idx_of(k1, k2)] = c;
            spec[idx_of(-k1, -k2)] = c.conj();
        }
    }
    let field = ScalarField::from_spectral(grid, spec);
    let norm = field.l2_norm();
    if norm == 0.0 {
        field
    } else {
        field.scaled(l2_amplitude / norm)
    }
}

/// Taylor–Green vortex ω̃ = 2a cos x₁ cos x₂, a steady Euler state.
pub fn taylor_green_vorticity(grid: SpectralGrid, amplitude: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x1, x2| 2.0 * amplitude * x1.cos() * x2.cos())
}
