//! Parametric transient heat problem on masked Cartesian grids.
//!
//! `kappa * dT/dt = lap(T)` is advanced by backward Euler from `T = 0` with a
//! time-constant Dirichlet condition peaked at the boundary point hit by a
//! ray from the domain centroid. Nodes strictly inside the polygon are
//! unknowns. Near the boundary the Laplacian uses the Shortley-Weller
//! stencil with the exact grid-line/boundary crossing, which keeps the
//! scheme second order on curved domains. Every step solves the same banded
//! M-matrix, factored once.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryDomain;
use crate::grid::{FieldSample, Point};

/// Settings shared by every solve of a data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSettings {
    pub kappa: f64,
    pub t0: f64,
    pub tf: f64,
    pub n_steps: usize,
    /// Exponent applied to the distance in the boundary profile (1 or 2).
    pub bc_distance_power: u32,
}

impl Default for HeatSettings {
    fn default() -> Self {
        Self { kappa: 0.015, t0: 0.0, tf: 1.0, n_steps: 50, bc_distance_power: 2 }
    }
}

impl HeatSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.tf > self.t0) {
            return Err(Error::Config(format!("tf ({}) must exceed t0 ({})", self.tf, self.t0)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if !matches!(self.bc_distance_power, 1 | 2) {
            return Err(Error::Config(format!("bc_distance_power must be 1 or 2, got {}", self.bc_distance_power)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HeatProblem<'a> {
    pub domain: &'a GeometryDomain,
    pub settings: HeatSettings,
    pub theta: f64,
    pub lambda: f64,
}

impl<'a> HeatProblem<'a> {
    pub fn new(domain: &'a GeometryDomain, settings: HeatSettings, theta: f64, lambda: f64) -> Result<Self> {
        settings.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(Self { domain, settings, theta, lambda })
    }

    /// Boundary point at polar angle `theta` seen from the domain centroid.
    pub fn source_point(&self) -> Result<Point> {
        let poly = &self.domain.boundary;
        poly.ray_hit(poly.centroid(), self.theta)
    }

    /// `max(0, lambda - |xc - x|^p) / lambda`.
    pub fn boundary_temperature(&self, x: Point) -> Result<f64> {
        let xc = self.source_point()?;
        Ok(boundary_profile(xc, self.lambda, self.settings.bc_distance_power, x))
    }
}

/// Boundary profile with a precomputed source point.
pub fn boundary_profile(xc: Point, lambda: f64, power: u32, x: Point) -> f64 {
    let d2 = (xc[0] - x[0]).powi(2) + (xc[1] - x[1]).powi(2);
    let d = if power == 2 { d2 } else { d2.sqrt() };
    (lambda - d).max(0.0) / lambda
}

/// Row-major band storage for a square matrix with `kl` sub- and `ku`
/// super-diagonals.
struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            out[i] = (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum();
        }
    }

    /// In-place LU without pivoting (valid for diagonally dominant matrices).
    fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::SingularSystem(format!("zero pivot at row {k}")));
            }
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[sik] = l;
                let skk = self.slot(k, k);
                let sii = self.slot(i, k);
                // columns k+1..=last_col are contiguous in both rows
                let width = last_col - k;
                let (src, dst) = (skk + 1, sii + 1);
                for off in 0..width {
                    let u = self.data[src + off];
                    self.data[dst + off] -= l * u;
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.kl);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[self.slot(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + self.ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[self.slot(i, j)] * b[j];
            }
            b[i] = s / self.data[self.slot(i, i)];
        }
    }
}

/// Discrete Laplacian on the unknown nodes of a domain: matrix coefficients
/// and the boundary contributions per unknown.
struct Stencil {
    unknowns: Vec<usize>,
    /// `(row, col, coeff)` couplings between unknowns, off-diagonal only.
    couplings: Vec<(usize, usize, f64)>,
    /// Positive sum of all neighbour weights per row.
    diagonal: Vec<f64>,
    /// `(row, weight, boundary point)` terms moved to the right-hand side.
    boundary: Vec<(usize, f64, Point)>,
}

fn build_stencil(domain: &GeometryDomain) -> Result<Stencil> {
    let grid = domain.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let sdf = &domain.sdf.values;
    let mut id = vec![usize::MAX; grid.len()];
    let mut unknowns = Vec::new();
    for k in 0..grid.len() {
        if sdf[k] > 0.0 {
            id[k] = unknowns.len();
            unknowns.push(k);
        }
    }
    if unknowns.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let poly = &domain.boundary;
    let mut couplings = Vec::new();
    let mut diagonal = vec![0.0; unknowns.len()];
    let mut boundary = Vec::new();
    for (row, &k) in unknowns.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        let p = grid.position(k);
        for axis in 0..2 {
            let h = grid.spacing[axis];
            // (neighbour index or None, direction sign)
            let mut arms = [(0.0, None::<usize>, [0.0; 2]); 2];
            for (slot, sign) in [(0usize, -1i64), (1usize, 1i64)] {
                let (ni, nj) = if axis == 0 { (i as i64 + sign, j as i64) } else { (i as i64, j as i64 + sign) };
                let mut q = p;
                q[axis] += sign as f64 * h;
                let inside = ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny && {
                    let nk = nj as usize * nx + ni as usize;
                    sdf[nk] > 0.0
                };
                if inside {
                    let nk = nj as usize * nx + ni as usize;
                    arms[slot] = (h, Some(id[nk]), q);
                } else {
                    let t = match poly.segment_exit(p, q) {
                        Some(t) => t,
                        None => {
                            let sq = if ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny {
                                sdf[nj as usize * nx + ni as usize]
                            } else {
                                -sdf[k]
                            };
                            (sdf[k] / (sdf[k] - sq)).clamp(0.0, 1.0)
                        }
                    };
                    let t = t.max(1e-6);
                    let mut xb = p;
                    xb[axis] += sign as f64 * t * h;
                    arms[slot] = (t * h, None, xb);
                }
            }
            let (hm, hp) = (arms[0].0, arms[1].0);
            let wm = 2.0 / (hm * (hm + hp));
            let wp = 2.0 / (hp * (hm + hp));
            diagonal[row] += wm + wp;
            for (w, (_, nb, xb)) in [(wm, arms[0]), (wp, arms[1])] {
                match nb {
                    Some(col) => couplings.push((row, col, w)),
                    None => boundary.push((row, w, xb)),
                }
            }
        }
    }
    Ok(Stencil { unknowns, couplings, diagonal, boundary })
}

/// Backward-Euler solution at `tf` on the domain grid. Masked-in nodes are
/// the interior unknowns; all other values are zero.
pub fn solve(problem: &HeatProblem) -> Result<FieldSample> {
    let st = build_stencil(problem.domain)?;
    let xc = problem.source_point()?;
    let s = &problem.settings;
    let g: Vec<(usize, f64)> = st
        .boundary
        .iter()
        .map(|&(row, w, xb)| (row, w * boundary_profile(xc, problem.lambda, s.bc_distance_power, xb)))
        .collect();
    let temps = integrate(&st, &g, s)?;
    let grid = problem.domain.grid();
    let mut values = vec![0.0; grid.len()];
    let mut mask = vec![false; grid.len()];
    for (&k, &t) in st.unknowns.iter().zip(&temps) {
        values[k] = t;
        mask[k] = true;
    }
    FieldSample::new(grid.clone().with_mask(mask)?, values)
}

/// Like [`solve`] with every boundary value forced to zero.
pub fn solve_zero_boundary(problem: &HeatProblem) -> Result<FieldSample> {
    let st = build_stencil(problem.domain)?;
    let temps = integrate(&st, &[], &problem.settings)?;
    let grid = problem.domain.grid();
    let mut values = vec![0.0; grid.len()];
    let mut mask = vec![false; grid.len()];
    for (&k, &t) in st.unknowns.iter().zip(&temps) {
        values[k] = t;
        mask[k] = true;
    }
    FieldSample::new(grid.clone().with_mask(mask)?, values)
}

fn integrate(st: &Stencil, boundary_rhs: &[(usize, f64)], s: &HeatSettings) -> Result<Vec<f64>> {
    let n = st.unknowns.len();
    let dt = (s.tf - s.t0) / s.n_steps as f64;
    let c = dt / s.kappa;
    let (mut kl, mut ku) = (0usize, 0usize);
    for &(r, col, _) in &st.couplings {
        if col < r {
            kl = kl.max(r - col);
        } else {
            ku = ku.max(col - r);
        }
    }
    let mut a = BandMatrix::new(n, kl, ku);
    for (r, d) in st.diagonal.iter().enumerate() {
        a.add(r, r, 1.0 + c * d);
    }
    for &(r, col, w) in &st.couplings {
        a.add(r, col, -c * w);
    }
    let original = BandMatrix { n, kl, ku, data: a.data.clone() };
    a.factor()?;

    let mut forcing = vec![0.0; n];
    for &(r, w) in boundary_rhs {
        forcing[r] += c * w;
    }
    let mut t = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut ax = vec![0.0; n];
    for _ in 0..s.n_steps {
        for i in 0..n {
            rhs[i] = t[i] + forcing[i];
        }
        let mut x = rhs.clone();
        a.solve_in_place(&mut x);
        // one step of iterative refinement keeps the residual at round-off
        original.mul(&x, &mut ax);
        let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b > 0.0 && norm_r > 1e-12 * norm_b {
            a.solve_in_place(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            original.mul(&x, &mut ax);
            let res = rhs.iter().zip(&ax).map(|(b, y)| (b - y).powi(2)).sum::<f64>().sqrt();
            if res > 1e-10 * norm_b {
                return Err(Error::SingularSystem(format!("residual {res:e} after refinement")));
            }
        }
        t = x;
    }
    Ok(t)
}

/// Latin-hypercube design over a box of parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoEPlan {
    pub samples: Vec<Vec<f64>>,
    pub bounds: Vec<[f64; 2]>,
}

impl DoEPlan {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One sample per stratum on every axis, jittered within its stratum.
pub fn lhs_sample(bounds: &[[f64; 2]], p: usize, seed: u64) -> Result<DoEPlan> {
    if p == 0 {
        return Err(Error::InvalidParameter("a design needs at least one sample".into()));
    }
    if bounds.iter().any(|b| !(b[1] >= b[0]) || !b[0].is_finite() || !b[1].is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid bounds {bounds:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![vec![0.0; bounds.len()]; p];
    for (axis, b) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..p).collect();
        strata.shuffle(&mut rng);
        for (s, &k) in samples.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            s[axis] = b[0] + (b[1] - b[0]) * ((k as f64 + u) / p as f64);
        }
    }
    Ok(DoEPlan { samples, bounds: bounds.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::grid::Grid;

    fn disk(n: usize) -> GeometryDomain {
        let g = Grid::over_box([-0.6, -0.6], [0.6, 0.6], n, n).unwrap();
        GeometryDomain::new(Polygon::regular([0.0, 0.0], 0.5, 256).unwrap(), &g, 50.0).unwrap()
    }

    #[test]
    fn boundary_profile_closed_forms() {
        assert_eq!(boundary_profile([0.1, 0.2], 0.3, 2, [0.1, 0.2]), 1.0);
        assert_eq!(boundary_profile([0.0, 0.0], 0.3, 2, [0.6, 0.0]), 0.0);
        let x = [0.15f64.sqrt(), 0.0];
        assert!((boundary_profile([0.0, 0.0], 0.3, 2, x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn band_lu_matches_dense_product() {
        let n = 7;
        let mut a = BandMatrix::new(n, 2, 1);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
            if i >= 2 {
                a.add(i, i - 2, -0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let mut b = vec![0.0; n];
        a.mul(&x, &mut b);
        a.factor().unwrap();
        a.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_boundary_gives_zero_solution() {
        let d = disk(33);
        let p = HeatProblem::new(&d, HeatSettings::default(), 0.3, 0.2).unwrap();
        let t = solve_zero_boundary(&p).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solution_is_bounded_and_peaks_near_source() {
        let d = disk(49);
        let p = HeatProblem::new(&d, HeatSettings::default(), 0.25 * std::f64::consts::PI, 0.3).unwrap();
        let t = solve(&p).unwrap();
        assert!(t.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let xc = p.source_point().unwrap();
        let near = t.at([0.9 * xc[0], 0.9 * xc[1]]).unwrap();
        let far = t.at([-0.9 * xc[0], -0.9 * xc[1]]).unwrap();
        assert!(near > far);
    }

    #[test]
    fn lhs_is_stratified_and_deterministic() {
        let b = [[0.05 * std::f64::consts::PI, 0.45 * std::f64::consts::PI], [0.05, 0.6]];
        let plan = lhs_sample(&b, 30, 4).unwrap();
        for (axis, r) in b.iter().enumerate() {
            let mut hit = vec![0; 30];
            for s in &plan.samples {
                let u = (s[axis] - r[0]) / (r[1] - r[0]);
                hit[((u * 30.0).floor() as usize).min(29)] += 1;
            }
            assert!(hit.iter().all(|&h| h == 1));
        }
        assert_eq!(plan, lhs_sample(&b, 30, 4).unwrap());
        let one = lhs_sample(&b, 1, 9).unwrap();
        assert!(one.samples[0][1] >= 0.05 && one.samples[0][1] <= 0.6);
    }
}
