//! Geometric p-variation rough paths over ℝ^K on finite time grids.
//!
//! A driver is stored as per-interval increments `(Z, ZZ)` of its level-2
//! lift; increments over arbitrary grid spans are recovered on demand by
//! Chen composition, which keeps storage linear in the number of grid
//! intervals. The second-level index convention is
//!
//! ```text
//! ZZ[l][k] = ∫_s^t Z^l_{sr} dz^k_r
//! ```
//!
//! i.e. the first index is the integrand component and the second the
//! integrator. All downstream contractions rely on this order.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoughPathError {
    #[error("path must have at least two strictly increasing times")]
    DegeneratePath,
    #[error("times must be strictly increasing (violation at index {0})")]
    NonIncreasingTimes(usize),
    #[error("value count {values} does not match times × dim = {expected}")]
    ValueCountMismatch { values: usize, expected: usize },
    #[error("driver dimension must be >= 1")]
    ZeroDimension,
    #[error("grid index {index} out of range (grid has {len} points)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("query requires s <= t, got indices {s} > {t}")]
    ReversedQuery { s: usize, t: usize },
    #[error("variation exponent p must lie in [2,3), got {0}")]
    InvalidExponent(f64),
    #[error("subgrid must be non-empty, strictly increasing, and within the grid")]
    InvalidSubgrid,
    #[error("Hurst index must lie in (1/3, 1], got {0}")]
    InvalidHurst(f64),
    #[error("dyadic level {0} too large (max {1})")]
    LevelTooLarge(u32, u32),
    #[error("final time must be positive, got {0}")]
    NonPositiveHorizon(f64),
}

/// A continuous piecewise-linear path t ↦ z_t ∈ ℝ^K on a strictly
/// increasing time grid. Stands in for the smooth approximants whose
/// canonical lifts generate the geometric rough paths used everywhere
/// else in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    /// Row-major `(times.len(), dim)` node values.
    values: Vec<f64>,
    dim: usize,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self, RoughPathError> {
        if dim == 0 {
            return Err(RoughPathError::ZeroDimension);
        }
        if times.len() < 2 {
            return Err(RoughPathError::DegeneratePath);
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(RoughPathError::NonIncreasingTimes(i));
            }
        }
        if values.len() != times.len() * dim {
            return Err(RoughPathError::ValueCountMismatch {
                values: values.len(),
                expected: times.len() * dim,
            });
        }
        Ok(Self { times, values, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolation at an arbitrary time inside the span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let seg = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.node(i).to_vec(),
            Err(i) => (i - 1).min(self.num_segments() - 1),
        };
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        let theta = (t - t0) / (t1 - t0);
        self.node(seg)
            .iter()
            .zip(self.node(seg + 1))
            .map(|(a, b)| a + theta * (b - a))
            .collect()
    }

    /// Subdivides every segment into equal pieces so that no interval
    /// exceeds `dt_max`. Interpolated nodes lie exactly on the original
    /// segments, so the canonical lift of the result restricts to the
    /// lift of `self` on the original breakpoints.
    pub fn refine_max_dt(&self, dt_max: f64) -> Self {
        assert!(dt_max > 0.0, "dt_max must be positive");
        let mut times = Vec::new();
        let mut values = Vec::new();
        for seg in 0..self.num_segments() {
            let (t0, t1) = (self.times[seg], self.times[seg + 1]);
            let pieces = ((t1 - t0) / dt_max).ceil().max(1.0) as usize;
            let a = self.node(seg);
            let b = self.node(seg + 1);
            for j in 0..pieces {
                let theta = j as f64 / pieces as f64;
                times.push(t0 + theta * (t1 - t0));
                values.extend(a.iter().zip(b).map(|(x, y)| x + theta * (y - x)));
            }
        }
        times.push(*self.times.last().unwrap());
        values.extend_from_slice(self.node(self.times.len() - 1));
        Self {
            times,
            values,
            dim: self.dim,
        }
    }
}

/// First- and second-level increments of a rough path over one span,
/// with `zz[l*dim + k] = ∫ Z^l dz^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub dim: usize,
    pub z: Vec<f64>,
    pub zz: Vec<f64>,
}

impl Increment {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            z: vec![0.0; dim],
            zz: vec![0.0; dim * dim],
        }
    }

    /// Chen composition: extends `self` over `[s,θ]` by `next` over
    /// `[θ,t]`, yielding the increment over `[s,t]`.
    pub fn chen_extend(&mut self, next: &Increment) {
        debug_assert_eq!(self.dim, next.dim);
        let k = self.dim;
        for l in 0..k {
            for m in 0..k {
                self.zz[l * k + m] += next.zz[l * k + m] + self.z[l] * next.z[m];
            }
        }
        for l in 0..k {
            self.z[l] += next.z[l];
        }
    }

    /// Frobenius norm of the second level.
    pub fn zz_norm(&self) -> f64 {
        self.zz.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the first level.
    pub fn z_norm(&self) -> f64 {
        self.z.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// The level-2 lift (Z, 𝕫) of a driver sampled on a time grid, stored as
/// per-interval increments that compose exactly via the Chen relations.
#[derive(Debug, Clone)]
pub struct GeometricRoughPathGrid {
    times: Vec<f64>,
    dim: usize,
    /// `(intervals, dim)` row-major.
    z_inc: Vec<f64>,
    /// `(intervals, dim, dim)` row-major.
    zz_inc: Vec<f64>,
}

impl GeometricRoughPathGrid {
    /// Canonical lift of a piecewise-linear path on its own breakpoints.
    ///
    /// On a single linear segment the iterated integral is exact:
    /// `∫ Z_{sr} ⊗ dz_r = ½ Δz ⊗ Δz`.
    pub fn canonical_lift(path: &PiecewiseLinearPath) -> Self {
        let k = path.dim();
        let m = path.num_segments();
        let mut z_inc = vec![0.0; m * k];
        let mut zz_inc = vec![0.0; m * k * k];
        for seg in 0..m {
            let a = path.node(seg);
            let b = path.node(seg + 1);
            for l in 0..k {
                z_inc[seg * k + l] = b[l] - a[l];
            }
            for l in 0..k {
                for j in 0..k {
                    zz_inc[seg * k * k + l * k + j] = 0.5 * z_inc[seg * k + l] * z_inc[seg * k + j];
                }
            }
        }
        Self {
            times: path.times().to_vec(),
            dim: k,
            z_inc,
            zz_inc,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn interval(&self, i: usize) -> Increment {
        let k = self.dim;
        Increment {
            dim: k,
            z: self.z_inc[i * k..(i + 1) * k].to_vec(),
            zz: self.zz_inc[i * k * k..(i + 1) * k * k].to_vec(),
        }
    }

    fn check_index(&self, i: usize) -> Result<(), RoughPathError> {
        if i >= self.times.len() {
            return Err(RoughPathError::IndexOutOfRange {
                index: i,
                len: self.times.len(),
            });
        }
        Ok(())
    }

    /// Increment over grid span `[times[s], times[t]]` by left-to-right
    /// Chen composition of the stored per-interval increments.
    pub fn increment(&self, s: usize, t: usize) -> Result<Increment, RoughPathError> {
        self.check_index(s)?;
        self.check_index(t)?;
        if s > t {
            return Err(RoughPathError::ReversedQuery { s, t });
        }
        let mut acc = Increment::zero(self.dim);
        for i in s..t {
            acc.chen_extend(&self.interval(i));
        }
        Ok(acc)
    }

    /// Chen defect δ𝕫_{sθt} − Z_{sθ} ⊗ Z_{θt} over a grid triple.
    ///
    /// Because pair increments are assembled from per-interval data by
    /// Chen composition, this is zero to round-off for any state of the
    /// stored table; it guards the composition arithmetic itself. Use
    /// [`chen_defect_parts`] to audit externally supplied pair data.
    pub fn chen_defect(&self, s: usize, theta: usize, t: usize) -> Result<Vec<f64>, RoughPathError> {
        let a = self.increment(s, theta)?;
        let b = self.increment(theta, t)?;
        let whole = self.increment(s, t)?;
        Ok(chen_defect_parts(&whole, &a, &b))
    }

    /// Geometricity defect sym(𝕫_{st}) − ½ Z_{st} ⊗ Z_{st}.
    pub fn geometricity_defect(&self, s: usize, t: usize) -> Result<Vec<f64>, RoughPathError> {
        let inc = self.increment(s, t)?;
        let k = self.dim;
        let mut defect = vec![0.0; k * k];
        for l in 0..k {
            for m in 0..k {
                let sym = 0.5 * (inc.zz[l * k + m] + inc.zz[m * k + l]);
                defect[l * k + m] = sym - 0.5 * inc.z[l] * inc.z[m];
            }
        }
        Ok(defect)
    }

    /// Prefix increments from grid point `points[0]` to every point of
    /// `points`, for O(1) assembly of arbitrary pair increments.
    fn prefix_increments(&self, points: &[usize]) -> Result<Vec<Increment>, RoughPathError> {
        let mut prefix = Vec::with_capacity(points.len());
        prefix.push(Increment::zero(self.dim));
        for w in 1..points.len() {
            let mut acc = prefix[w - 1].clone();
            acc.chen_extend(&self.increment(points[w - 1], points[w])?);
            prefix.push(acc);
        }
        Ok(prefix)
    }

    fn pair_from_prefix(prefix: &[Increment], a: usize, b: usize) -> Increment {
        let k = prefix[0].dim;
        let mut z = vec![0.0; k];
        let mut zz = vec![0.0; k * k];
        for l in 0..k {
            z[l] = prefix[b].z[l] - prefix[a].z[l];
        }
        for l in 0..k {
            for m in 0..k {
                zz[l * k + m] =
                    prefix[b].zz[l * k + m] - prefix[a].zz[l * k + m] - prefix[a].z[l] * z[m];
            }
        }
        Increment { dim: k, z, zz }
    }

    /// Largest Chen defect entry over all grid triples.
    pub fn max_chen_defect(&self) -> f64 {
        let points: Vec<usize> = (0..self.times.len()).collect();
        let prefix = self.prefix_increments(&points).expect("full grid is valid");
        let n = points.len();
        let mut worst = 0.0_f64;
        for s in 0..n {
            for theta in s..n {
                let left = Self::pair_from_prefix(&prefix, s, theta);
                for t in theta..n {
                    let right = Self::pair_from_prefix(&prefix, theta, t);
                    let whole = Self::pair_from_prefix(&prefix, s, t);
                    let defect = chen_defect_parts(&whole, &left, &right);
                    worst = defect.iter().fold(worst, |m, x| m.max(x.abs()));
                }
            }
        }
        worst
    }

    /// Largest geometricity defect entry over all grid pairs.
    pub fn max_geometricity_defect(&self) -> f64 {
        let points: Vec<usize> = (0..self.times.len()).collect();
        let prefix = self.prefix_increments(&points).expect("full grid is valid");
        let n = points.len();
        let k = self.dim;
        let mut worst = 0.0_f64;
        for s in 0..n {
            for t in s..n {
                let inc = Self::pair_from_prefix(&prefix, s, t);
                for l in 0..k {
                    for m in 0..k {
                        let sym = 0.5 * (inc.zz[l * k + m] + inc.zz[m * k + l]);
                        worst = worst.max((sym - 0.5 * inc.z[l] * inc.z[m]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Grid control ϖ(s,t) = |Z|^p_{p-var;[s,t]} + |𝕫|^{p/2}_{p/2-var;[s,t]}
    /// with both suprema taken over partitions drawn from `subgrid`.
    ///
    /// The continuum supremum is not computable; the grid supremum is the
    /// surrogate, evaluated exactly by dynamic programming.
    pub fn p_variation_control(
        &self,
        p: f64,
        subgrid: &[usize],
    ) -> Result<Control, RoughPathError> {
        if !(2.0..3.0).contains(&p) {
            return Err(RoughPathError::InvalidExponent(p));
        }
        if subgrid.is_empty() || subgrid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RoughPathError::InvalidSubgrid);
        }
        for &i in subgrid {
            self.check_index(i).map_err(|_| RoughPathError::InvalidSubgrid)?;
        }
        let n = subgrid.len();

        // Prefix increments from subgrid[0]; pairwise spans follow from Chen.
        let prefix = self.prefix_increments(subgrid)?;
        let pair = |a: usize, b: usize| -> Increment { Self::pair_from_prefix(&prefix, a, b) };

        let mut z_norm = vec![0.0; n * n];
        let mut zz_norm = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let inc = pair(a, b);
                z_norm[a * n + b] = inc.z_norm();
                zz_norm[a * n + b] = inc.zz_norm();
            }
        }

        // sup over subgrid partitions of Σ |inc|^q, for each left endpoint.
        let pvar_sums = |norms: &[f64], q: f64| -> Vec<f64> {
            let mut table = vec![0.0; n * n];
            for a in 0..n {
                for b in (a + 1)..n {
                    let mut best = 0.0_f64;
                    for m in a..b {
                        let cand = table[a * n + m] + norms[m * n + b].powf(q);
                        if cand > best {
                            best = cand;
                        }
                    }
                    table[a * n + b] = best;
                }
            }
            table
        };
        let sums1 = pvar_sums(&z_norm, p);
        let sums2 = pvar_sums(&zz_norm, p / 2.0);

        let mut table = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                table[a * n + b] = sums1[a * n + b] + sums2[a * n + b];
            }
        }
        // Superadditive envelope so that ϖ(s,θ)+ϖ(θ,t) ≤ ϖ(s,t) holds
        // exactly in floating point, not just up to rounding.
        for span in 2..n {
            for a in 0..(n - span) {
                let b = a + span;
                for m in (a + 1)..b {
                    let cand = table[a * n + m] + table[m * n + b];
                    if cand > table[a * n + b] {
                        table[a * n + b] = cand;
                    }
                }
            }
        }

        Ok(Control {
            grid_indices: subgrid.to_vec(),
            times: subgrid.iter().map(|&i| self.times[i]).collect(),
            p,
            table,
        })
    }

    /// Single-interval roughness proxy |Z_{st}|^p + |𝕫_{st}|^{p/2} used
    /// for step acceptance.
    pub fn step_proxy(&self, s: usize, t: usize, p: f64) -> Result<f64, RoughPathError> {
        let inc = self.increment(s, t)?;
        Ok(inc.z_norm().powf(p) + inc.zz_norm().powf(p / 2.0))
    }

    #[cfg(test)]
    pub(crate) fn corrupt_zz_entry(&mut self, interval: usize, l: usize, m: usize, delta: f64) {
        let k = self.dim;
        self.zz_inc[interval * k * k + l * k + m] += delta;
    }
}

/// Chen defect of explicit pair increments over a triple (s,θ,t):
/// `whole.zz − left.zz − right.zz − left.z ⊗ right.z`.
pub fn chen_defect_parts(whole: &Increment, left: &Increment, right: &Increment) -> Vec<f64> {
    let k = whole.dim;
    debug_assert!(left.dim == k && right.dim == k);
    let mut defect = vec![0.0; k * k];
    for l in 0..k {
        for m in 0..k {
            let delta = whole.zz[l * k + m] - left.zz[l * k + m] - right.zz[l * k + m];
            defect[l * k + m] = delta - left.z[l] * right.z[m];
        }
    }
    defect
}

/// Superadditive two-index function ϖ(t_i, t_j) ≥ 0 tabulated on a grid.
#[derive(Debug, Clone)]
pub struct Control {
    grid_indices: Vec<usize>,
    times: Vec<f64>,
    p: f64,
    /// `(n, n)` row-major; only the upper triangle is meaningful.
    table: Vec<f64>,
}

impl Control {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.grid_indices
    }

    /// ϖ between subgrid positions `a ≤ b`.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        assert!(a <= b && b < self.len());
        self.table[a * self.len() + b]
    }
}

const MAX_DYADIC_LEVEL: u32 = 24;

/// Deterministic stream of standard Gaussians.
///
/// Uniforms come from the counter-based ChaCha12 generator keyed by
/// `(seed, stream)`; each 64-bit draw maps to (0,1) via
/// `(x >> 11 + 0.5) / 2^53` and pairs feed the Box–Muller transform.
/// The draw order is fixed, so outputs are reproducible across platforms.
pub struct GaussianStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare.take() {
            return g;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Piecewise-linear interpolation of a standard K-dimensional Brownian
/// sample on the dyadic grid with 2^level intervals over [0, T].
///
/// Construction is by Lévy bridge refinement with one Gaussian stream per
/// refinement level, so paths from the same seed are nested: the level
/// n+1 path agrees bitwise with the level n path at level-n grid points.
pub fn brownian_dyadic_path(
    seed: u64,
    level: u32,
    t_final: f64,
    dim: usize,
) -> Result<PiecewiseLinearPath, RoughPathError> {
    if dim == 0 {
        return Err(RoughPathError::ZeroDimension);
    }
    if t_final <= 0.0 {
        return Err(RoughPathError::NonPositiveHorizon(t_final));
    }
    if level > MAX_DYADIC_LEVEL {
        return Err(RoughPathError::LevelTooLarge(level, MAX_DYADIC_LEVEL));
    }
    let m = 1usize << level;
    let mut values = vec![0.0; (m + 1) * dim];

    // Endpoint from stream 0.
    let mut endpoint = GaussianStream::new(seed, 0);
    let sqrt_t = t_final.sqrt();
    for c in 0..dim {
        values[m * dim + c] = sqrt_t * endpoint.next_gaussian();
    }

    // Bridge midpoints, coarse to fine; level ℓ uses stream ℓ.
    for l in 1..=level {
        let stride = m >> l;
        let half_var = t_final / (1u64 << (l + 1)) as f64;
        let sd = half_var.sqrt();
        let mut stream = GaussianStream::new(seed, l as u64);
        let mut j = stride;
        while j < m {
            for c in 0..dim {
                let left = values[(j - stride) * dim + c];
                let right = values[(j + stride) * dim + c];
                values[j * dim + c] = 0.5 * (left + right) + sd * stream.next_gaussian();
            }
            j += 2 * stride;
        }
    }

    let times = (0..=m)
        .map(|i| t_final * i as f64 / m as f64)
        .collect::<Vec<_>>();
    PiecewiseLinearPath::new(times, values, dim)
}

/// Fractional Brownian sample on the dyadic grid with exact covariance,
/// via Cholesky factorisation; components independent. Only Hurst > 1/3
/// is admitted, where the canonical level-2 lift of the interpolant is
/// the right object.
pub fn fbm_dyadic_path(
    seed: u64,
    hurst: f64,
    level: u32,
    t_final: f64,
    dim: usize,
) -> Result<PiecewiseLinearPath, RoughPathError> {
    if dim == 0 {
        return Err(RoughPathError::ZeroDimension);
    }
    if t_final <= 0.0 {
        return Err(RoughPathError::NonPositiveHorizon(t_final));
    }
    if !(hurst > 1.0 / 3.0 && hurst <= 1.0) {
        return Err(RoughPathError::InvalidHurst(hurst));
    }
    if level > 12 {
        return Err(RoughPathError::LevelTooLarge(level, 12));
    }
    let m = 1usize << level;
    let times: Vec<f64> = (0..=m).map(|i| t_final * i as f64 / m as f64).collect();

    // Covariance of (B_{t_1},…,B_{t_m}); t_0 = 0 is pinned.
    let cov = |i: usize, j: usize| -> f64 {
        let (ti, tj) = (times[i + 1], times[j + 1]);
        0.5 * (ti.powf(2.0 * hurst) + tj.powf(2.0 * hurst) - (ti - tj).abs().powf(2.0 * hurst))
    };
    let mut chol = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = cov(i, j);
            for q in 0..j {
                sum -= chol[i * m + q] * chol[j * m + q];
            }
            if i == j {
                chol[i * m + i] = sum.max(0.0).sqrt();
            } else {
                chol[i * m + j] = if chol[j * m + j] > 0.0 {
                    sum / chol[j * m + j]
                } else {
                    0.0
                };
            }
        }
    }

    let mut values = vec![0.0; (m + 1) * dim];
    for c in 0..dim {
        let mut stream = GaussianStream::new(seed, c as u64 + 1);
        let gauss: Vec<f64> = (0..m).map(|_| stream.next_gaussian()).collect();
        for i in 0..m {
            let mut x = 0.0;
            for q in 0..=i {
                x += chol[i * m + q] * gauss[q];
            }
            values[(i + 1) * dim + c] = x;
        }
    }
    PiecewiseLinearPath::new(times, values, dim)
}
