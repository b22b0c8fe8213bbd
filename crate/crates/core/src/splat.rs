//! Gaussian splatting of normalized scalar fields.
//!
//! A field is approximated by `N` identical isotropic Gaussians of bandwidth
//! `sigma`, each carrying mass `1/N`, so only the particle centers are free.
//! [`decompose`] fits those centers by least squares over the masked grid
//! nodes; [`evaluate_cloud`] reconstructs a field from a cloud.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldSample, Grid, Point};

/// Centers of `N` identical Gaussians sharing one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub centers: Vec<Point>,
    pub sigma: f64,
}

impl ParticleCloud {
    pub fn new(centers: Vec<Point>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidBandwidth(sigma));
        }
        if centers.is_empty() {
            return Err(Error::InvalidParameter("a particle cloud needs at least one particle".into()));
        }
        if centers.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::NaNField);
        }
        Ok(Self { centers, sigma })
    }

    pub fn n_particles(&self) -> usize {
        self.centers.len()
    }

    /// Peak height of a single particle: `1 / (N sigma^2 2 pi)`.
    pub fn particle_weight(&self) -> f64 {
        1.0 / (self.n_particles() as f64 * self.sigma * self.sigma * 2.0 * PI)
    }

    /// Plane integral of the reconstruction; one by construction.
    pub fn total_mass(&self) -> f64 {
        self.particle_weight() * self.n_particles() as f64 * 2.0 * PI * self.sigma * self.sigma
    }

    /// Rows reordered so that row `n` of the result is row `perm[n]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { centers: perm.iter().map(|&k| self.centers[k]).collect(), sigma: self.sigma }
    }

    /// Exact analytic mass of the reconstruction inside the box `[min, max]`.
    pub fn mass_in_box(&self, min: Point, max: Point) -> f64 {
        let s = self.sigma * std::f64::consts::SQRT_2;
        let frac = |lo: f64, hi: f64, mu: f64| 0.5 * (libm::erf((hi - mu) / s) - libm::erf((lo - mu) / s));
        let per: f64 = self
            .centers
            .iter()
            .map(|c| frac(min[0], max[0], c[0]) * frac(min[1], max[1], c[1]))
            .sum();
        per / self.n_particles() as f64
    }

    /// Axis-aligned bounding box of the centers.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.centers {
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Point {
        let n = self.n_particles() as f64;
        let (sx, sy) = self.centers.iter().fold((0.0, 0.0), |(x, y), c| (x + c[0], y + c[1]));
        [sx / n, sy / n]
    }
}

/// Divides a non-negative field by its masked integral.
pub fn normalize_field(raw: &FieldSample) -> Result<FieldSample> {
    if !raw.is_finite() {
        return Err(Error::NaNField);
    }
    if let Some(v) = raw.masked_values().find(|&v| v < -1e-12) {
        return Err(Error::NonPositiveField(format!("masked value {v} is negative")));
    }
    let integral = raw.quadrature();
    if !(integral > 0.0) {
        return Err(Error::NonPositiveField(format!("integral {integral} is not positive")));
    }
    Ok(FieldSample {
        grid: raw.grid.clone(),
        values: raw.values.iter().map(|v| v / integral).collect(),
        integral: Some(integral),
    })
}

/// Reconstructs a cloud on every grid node (the mask is ignored).
///
/// The sum is exact: no truncation radius is applied, so every node within
/// floating-point range of some particle receives a positive value.
pub fn evaluate_cloud(cloud: &ParticleCloud, grid: &Grid) -> FieldSample {
    let values = accumulate(cloud, grid, None);
    FieldSample { grid: grid.clone(), values, integral: None }
}

/// Like [`evaluate_cloud`] but ignores particle contributions beyond
/// `cutoff_sigmas * sigma` along either axis. Used on the inference path.
pub fn evaluate_cloud_truncated(cloud: &ParticleCloud, grid: &Grid, cutoff_sigmas: f64) -> FieldSample {
    let values = accumulate(cloud, grid, Some(cutoff_sigmas * cloud.sigma));
    FieldSample { grid: grid.clone(), values, integral: None }
}

/// Half-open index range of lattice nodes within `radius` of `center` along one axis.
#[inline]
fn window(center: f64, radius: Option<f64>, origin: f64, h: f64, n: usize) -> (usize, usize) {
    match radius {
        None => (0, n),
        Some(r) => {
            let lo = ((center - r - origin) / h).ceil();
            let hi = ((center + r - origin) / h).floor();
            if hi < 0.0 || lo > (n - 1) as f64 || lo > hi {
                return (0, 0);
            }
            (lo.max(0.0) as usize, (hi.min((n - 1) as f64) as usize) + 1)
        }
    }
}

fn accumulate(cloud: &ParticleCloud, grid: &Grid, radius: Option<f64>) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    let w = cloud.particle_weight();
    let inv = 1.0 / (2.0 * cloud.sigma * cloud.sigma);
    let xs = grid.x_coords();
    let ys = grid.y_coords();
    let mut ex = vec![0.0; grid.nx];
    for c in &cloud.centers {
        let (i0, i1) = window(c[0], radius, grid.origin[0], grid.spacing[0], grid.nx);
        let (j0, j1) = window(c[1], radius, grid.origin[1], grid.spacing[1], grid.ny);
        if i0 == i1 || j0 == j1 {
            continue;
        }
        for i in i0..i1 {
            let d = xs[i] - c[0];
            ex[i] = (-d * d * inv).exp();
        }
        for j in j0..j1 {
            let d = ys[j] - c[1];
            let ey = w * (-d * d * inv).exp();
            if ey == 0.0 {
                continue;
            }
            let row = &mut out[j * grid.nx + i0..j * grid.nx + i1];
            for (o, e) in row.iter_mut().zip(&ex[i0..i1]) {
                *o += ey * e;
            }
        }
    }
    out
}

/// Splits a signed field into its positive part and its negated negative part.
pub fn split_signed(raw: &FieldSample) -> Result<(FieldSample, FieldSample)> {
    if !raw.is_finite() {
        return Err(Error::NaNField);
    }
    let pos = raw.values.iter().map(|&v| v.max(0.0)).collect();
    let neg = raw.values.iter().map(|&v| (-v).max(0.0)).collect();
    Ok((
        FieldSample { grid: raw.grid.clone(), values: pos, integral: None },
        FieldSample { grid: raw.grid.clone(), values: neg, integral: None },
    ))
}

/// Least-squares misfit between a target density and a particle reconstruction,
/// restricted to the masked nodes of the target grid.
///
/// Particle contributions are truncated at `cutoff_sigmas * sigma`; at the
/// default of 8 the neglected tail is below `1e-13` of a particle's peak.
#[derive(Debug, Clone)]
pub struct SplatObjective<'a> {
    target: &'a FieldSample,
    xs: Vec<f64>,
    ys: Vec<f64>,
    n_particles: usize,
    sigma: f64,
    radius: Option<f64>,
    fit_amplitude: bool,
}

impl<'a> SplatObjective<'a> {
    pub fn new(target: &'a FieldSample, n_particles: usize, sigma: f64, cutoff_sigmas: Option<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidBandwidth(sigma));
        }
        if n_particles == 0 {
            return Err(Error::InvalidParameter("n_particles must be at least 1".into()));
        }
        Ok(Self {
            xs: target.grid.x_coords(),
            ys: target.grid.y_coords(),
            target,
            n_particles,
            sigma,
            radius: cutoff_sigmas.map(|c| c * sigma),
            fit_amplitude: false,
        })
    }

    /// Also fits a scalar amplitude `s` of the reconstruction, eliminated in
    /// closed form (`s = <target, recon> / <recon, recon>` on masked nodes).
    pub fn with_amplitude(mut self, fit: bool) -> Self {
        self.fit_amplitude = fit;
        self
    }

    /// Optimal amplitude for the given centers (1 when not fitted).
    pub fn amplitude(&self, centers: &[Point]) -> f64 {
        let mut r = Vec::new();
        self.residual(centers, &mut r).1
    }

    fn weight(&self) -> f64 {
        1.0 / (self.n_particles as f64 * self.sigma * self.sigma * 2.0 * PI)
    }

    /// Fills `residual` with (scaled) reconstruction minus target on masked
    /// nodes (zero elsewhere); returns the objective and the amplitude.
    fn residual(&self, centers: &[Point], residual: &mut Vec<f64>) -> (f64, f64) {
        let grid = &self.target.grid;
        let cloud = ParticleCloud { centers: centers.to_vec(), sigma: self.sigma };
        let recon = accumulate(&cloud, grid, self.radius);
        let amp = if self.fit_amplitude {
            let (mut tr, mut rr) = (0.0, 0.0);
            for ((r, t), &m) in recon.iter().zip(&self.target.values).zip(&grid.mask) {
                if m {
                    tr += t * r;
                    rr += r * r;
                }
            }
            if rr > 0.0 {
                tr / rr
            } else {
                1.0
            }
        } else {
            1.0
        };
        residual.clear();
        residual.extend(
            recon
                .iter()
                .zip(&self.target.values)
                .zip(&grid.mask)
                .map(|((r, t), &m)| if m { amp * r - t } else { 0.0 }),
        );
        (0.5 * residual.iter().map(|r| r * r).sum::<f64>(), amp)
    }

    pub fn value(&self, centers: &[Point]) -> f64 {
        let mut r = Vec::new();
        self.residual(centers, &mut r).0
    }

    /// Objective and its gradient with respect to every center coordinate.
    pub fn value_and_gradient(&self, centers: &[Point], grad: &mut Vec<Point>) -> f64 {
        let mut r = Vec::new();
        let (f, amp) = self.residual(centers, &mut r);
        let grid = &self.target.grid;
        let w = self.weight();
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        // with a fitted amplitude the partial derivative in `amp` vanishes
        let scale = amp * w / (self.sigma * self.sigma);
        let mut ex = vec![0.0; grid.nx];
        grad.clear();
        for c in centers {
            let (i0, i1) = window(c[0], self.radius, grid.origin[0], grid.spacing[0], grid.nx);
            let (j0, j1) = window(c[1], self.radius, grid.origin[1], grid.spacing[1], grid.ny);
            if i0 == i1 || j0 == j1 {
                grad.push([0.0, 0.0]);
                continue;
            }
            for i in i0..i1 {
                let d = self.xs[i] - c[0];
                ex[i] = (-d * d * inv).exp();
            }
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in j0..j1 {
                let dy = self.ys[j] - c[1];
                let ey = (-dy * dy * inv).exp();
                let row = &r[j * grid.nx + i0..j * grid.nx + i1];
                let (mut s0, mut s1) = (0.0, 0.0);
                for ((rv, e), x) in row.iter().zip(&ex[i0..i1]).zip(&self.xs[i0..i1]) {
                    let t = rv * e;
                    s0 += t;
                    s1 += t * (x - c[0]);
                }
                gx += ey * s1;
                gy += ey * dy * s0;
            }
            grad.push([scale * gx, scale * gy]);
        }
        f
    }
}

/// Settings for [`decompose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeOptions {
    /// Stop once the objective decreases by less than this between iterates.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the importance-sampled initialization.
    pub seed: u64,
    /// Truncation radius in bandwidths; `None` evaluates every node.
    pub cutoff_sigmas: Option<f64>,
    /// Fit a global amplitude alongside the centers (see
    /// [`SplatObjective::with_amplitude`]).
    pub fit_amplitude: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-4, max_iterations: 5000, seed: 0, cutoff_sigmas: Some(8.0), fit_amplitude: false }
    }
}

/// Result of a decomposition run.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub cloud: ParticleCloud,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after initialization and after every accepted iterate.
    pub history: Vec<f64>,
    /// Set when the iteration cap was hit while the objective was still
    /// decreasing by more than ten times the tolerance.
    pub did_not_converge: bool,
    /// Fitted amplitude of the reconstruction (1 unless requested).
    pub amplitude: f64,
}

/// Draws `n` centers from the masked nodes with probability proportional to
/// the (non-negative part of the) target, jittered uniformly within a cell.
pub fn importance_init(target: &FieldSample, n: usize, sigma: f64, seed: u64) -> Result<ParticleCloud> {
    let grid = &target.grid;
    let weight = |i: usize, j: usize| {
        let k = grid.index(i, j);
        if grid.mask[k] {
            target.values[k].max(0.0)
        } else {
            0.0
        }
    };
    let rows: Vec<f64> = (0..grid.ny).map(|j| (0..grid.nx).map(|i| weight(i, j)).sum()).collect();
    if !(rows.iter().sum::<f64>() > 0.0) {
        return Err(Error::NonPositiveField("cannot sample particles from a zero field".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = (0..n)
        .map(|_| {
            let (uy, ux) = (rng.gen::<f64>(), rng.gen::<f64>());
            let (j, ty) = invert_cells(&rows, uy);
            let row: Vec<f64> = (0..grid.nx).map(|i| weight(i, j)).collect();
            let (i, tx) = invert_cells(&row, ux);
            let p = grid.position(grid.index(i, j));
            [p[0] + (tx - 0.5) * grid.spacing[0], p[1] + (ty - 0.5) * grid.spacing[1]]
        })
        .collect();
    ParticleCloud::new(centers, sigma)
}

/// Inverts the piecewise-linear CDF of cell masses at quantile `u`, returning
/// the cell and the fractional position inside it.
fn invert_cells(masses: &[f64], u: f64) -> (usize, f64) {
    let total: f64 = masses.iter().sum();
    let goal = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (c, &m) in masses.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        if acc + m >= goal {
            return (c, ((goal - acc) / m).clamp(0.0, 1.0));
        }
        acc += m;
        last = c;
    }
    (last, 1.0)
}

fn dot(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum()
}

/// Outcome of one gradient-descent run.
struct Descent {
    f: f64,
    iterations: usize,
    last_decrease: f64,
}

/// Steepest descent from `x` with Barzilai-Borwein trial steps and Armijo
/// backtracking. Appends accepted objective values to `history`.
fn descend(
    objective: &SplatObjective,
    x: &mut Vec<Point>,
    max_iterations: usize,
    tolerance: f64,
    history: &mut Vec<f64>,
) -> Descent {
    let n = x.len();
    let sigma = objective.sigma;
    let mut g = Vec::new();
    let mut f = objective.value_and_gradient(x, &mut g);
    // Initial trial step moves the fastest particle by a tenth of a bandwidth.
    let gmax = g.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
    let mut step = if gmax > 0.0 { 0.1 * sigma / gmax } else { 0.0 };
    let mut iterations = 0;
    let mut last_decrease = f64::INFINITY;
    let mut trial = vec![[0.0; 2]; n];
    let mut g_new = Vec::new();

    while iterations < max_iterations && step > 0.0 {
        let gg = dot(&g, &g);
        if gg == 0.0 {
            last_decrease = 0.0;
            break;
        }
        let mut alpha = step;
        let mut accepted = false;
        for _ in 0..60 {
            for ((t, xi), gi) in trial.iter_mut().zip(x.iter()).zip(&g) {
                t[0] = xi[0] - alpha * gi[0];
                t[1] = xi[1] - alpha * gi[1];
            }
            if objective.value(&trial) <= f - 1e-4 * alpha * gg {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent possible at floating-point resolution.
            last_decrease = 0.0;
            break;
        }
        let f_new = objective.value_and_gradient(&trial, &mut g_new);
        // Barzilai-Borwein length for the next trial step.
        let mut sy = 0.0;
        let mut ss = 0.0;
        for ((t, xi), (gn, go)) in trial.iter().zip(x.iter()).zip(g_new.iter().zip(&g)) {
            let s = [t[0] - xi[0], t[1] - xi[1]];
            let y = [gn[0] - go[0], gn[1] - go[1]];
            sy += s[0] * y[0] + s[1] * y[1];
            ss += s[0] * s[0] + s[1] * s[1];
        }
        step = if sy > 0.0 { ss / sy } else { alpha * 2.0 };
        std::mem::swap(x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        last_decrease = f - f_new;
        f = f_new;
        history.push(f);
        iterations += 1;
        if last_decrease < tolerance {
            break;
        }
    }
    Descent { f, iterations, last_decrease }
}

/// Fits the centers of `n_particles` Gaussians of bandwidth `sigma` to a
/// normalized target by gradient descent.
///
/// Steps use the Barzilai-Borwein length as a trial and backtrack until the
/// Armijo condition holds, so accepted objectives never increase.
pub fn decompose(
    target: &FieldSample,
    n_particles: usize,
    sigma: f64,
    init: Option<&ParticleCloud>,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidBandwidth(sigma));
    }
    if !target.is_finite() {
        return Err(Error::NaNField);
    }
    let mass = target.quadrature();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("target must be normalized, integral is {mass}")));
    }
    let mut x = match init {
        Some(c) if c.n_particles() == n_particles => c.centers.clone(),
        Some(c) => {
            return Err(Error::SizeMismatch(format!(
                "initial cloud has {} particles, expected {n_particles}",
                c.n_particles()
            )))
        }
        None => importance_init(target, n_particles, sigma, opts.seed)?.centers,
    };

    let objective = SplatObjective::new(target, n_particles, sigma, opts.cutoff_sigmas)?.with_amplitude(opts.fit_amplitude);
    let mut history = vec![objective.value(&x)];
    let run = descend(&objective, &mut x, opts.max_iterations, opts.tolerance, &mut history);
    let iterations = run.iterations;

    let did_not_converge = iterations >= opts.max_iterations && run.last_decrease > 10.0 * opts.tolerance;
    if did_not_converge {
        log::warn!("decomposition hit the iteration cap with objective decrease {:.3e}", run.last_decrease);
    }
    let amplitude = objective.amplitude(&x);
    Ok(Decomposition {
        amplitude,
        cloud: ParticleCloud::new(x, sigma)?,
        objective: run.f,
        iterations,
        history,
        did_not_converge,
    })
}

/// Exact fraction of a cloud's unit mass lying outside the cells of `grid`
/// (the node lattice widened by half a spacing on every side).
pub fn leaked_mass(cloud: &ParticleCloud, grid: &Grid) -> f64 {
    let [hx, hy] = grid.spacing;
    let min = [grid.origin[0] - 0.5 * hx, grid.origin[1] - 0.5 * hy];
    let max = [min[0] + grid.nx as f64 * hx, min[1] + grid.ny as f64 * hy];
    (1.0 - cloud.mass_in_box(min, max)).max(0.0)
}
