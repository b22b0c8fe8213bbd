//! Offline training and online inference of the combined surrogate.
//!
//! Training decomposes every `K x P` snapshot into a particle cloud, matches
//! all of them jointly so rows correspond within and across geometries, and
//! fits one solution model per geometry (POD basis, coefficient regressor,
//! integral regressor). The geometry model is the matched ensemble of domain
//! clouds. Inference regresses particle positions and integrals per geometry
//! and blends them with the same barycentric weights as the domain clouds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, BarycentricWeights, GeometryDomain, Polygon};
use crate::grid::{FieldSample, Grid, Point};
use crate::matching::{self, MatchedEnsemble, MultiMatchConfig};
use crate::regression::{self, PodBasis, PolyRegressor, RegressorOptions, SnapshotMatrix};
use crate::splat::{self, DecomposeOptions, ParticleCloud};

/// Hyperparameters of the offline pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub n_s: usize,
    pub sigma_s: f64,
    pub n_g: usize,
    pub sigma_g: f64,
    pub energy_threshold: f64,
    pub regressor: RegressorOptions,
    pub decompose: DecomposeOptions,
    pub matching: MultiMatchConfig,
    /// Truncation radius (in bandwidths) used when evaluating clouds online.
    pub inference_cutoff: f64,
    /// Worker threads for the decomposition stages (1 = sequential).
    pub threads: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            n_s: 600,
            sigma_s: 0.03,
            n_g: 600,
            sigma_g: 0.02,
            energy_threshold: 0.9999,
            regressor: RegressorOptions::default(),
            decompose: DecomposeOptions { fit_amplitude: true, ..DecomposeOptions::default() },
            matching: MultiMatchConfig::default(),
            inference_cutoff: 9.0,
            threads: 1,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_g == 0 {
            return Err(Error::Config("particle counts must be positive".into()));
        }
        for (name, s) in [("sigma_s", self.sigma_s), ("sigma_g", self.sigma_g)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {s}")));
            }
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold <= 1.0) {
            return Err(Error::Config("energy_threshold must lie in (0, 1]".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.matching.validate()
    }
}

/// Solution model of one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ssm {
    pub geometry: usize,
    pub n_s: usize,
    pub sigma_s: f64,
    pub pod: PodBasis,
    pub regressor: PolyRegressor,
    pub integral_model: PolyRegressor,
    pub params: Vec<Vec<f64>>,
    pub integrals: Vec<f64>,
}

impl Ssm {
    /// Predicted particle cloud and (clamped) integral at `theta`.
    pub fn predict(&self, theta: &[f64]) -> Result<(ParticleCloud, f64, bool)> {
        let coeffs = self.regressor.predict(theta)?;
        let flat = self.pod.reconstruct(&coeffs);
        let centers: Vec<Point> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let cloud = ParticleCloud::new(centers, self.sigma_s)?;
        let raw = self.integral_model.predict(theta)?[0];
        let clamped = raw < 0.0;
        if clamped {
            log::warn!("predicted integral {raw:.3e} is negative; clamped to zero");
        }
        Ok((cloud, raw.max(0.0), clamped))
    }
}

/// Geometry model: matched domain clouds on the shared reference box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sgm {
    pub ensemble: MatchedEnsemble,
    pub sigma_g: f64,
    pub n_g: usize,
    pub box_min: Point,
    pub box_max: Point,
    pub polygons: Vec<Polygon>,
    /// Interior node masks of the sampled domains on the reference grid.
    pub masks: Vec<Vec<bool>>,
}

impl Sgm {
    pub fn k(&self) -> usize {
        self.ensemble.clouds.len()
    }

    /// Barycentric interpolation requires at least two sampled domains.
    pub fn interpolating(&self) -> bool {
        self.k() >= 2
    }
}

/// Build and seed metadata stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub crate_version: String,
}

/// Everything needed for online inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub config: SurrogateConfig,
    pub grid: Grid,
    pub sgm: Sgm,
    pub ssms: Vec<Ssm>,
    /// Orderings of the joint match over all `K x P` solution clouds
    /// (cloud `k * P + p`; the first cloud is the identity reference).
    pub solution_orderings: Vec<Vec<usize>>,
    /// Matched solution clouds, geometry-major.
    pub solution_clouds: Vec<ParticleCloud>,
    pub provenance: Provenance,
}

impl ModelContainer {
    pub fn k(&self) -> usize {
        self.ssms.len()
    }

    pub fn snapshots_per_geometry(&self) -> usize {
        self.ssms.first().map_or(0, |s| s.params.len())
    }

    /// Bounding box of the training parameters over all geometries.
    pub fn parameter_bounds(&self) -> Vec<[f64; 2]> {
        let q = self.ssms.first().map_or(0, |s| s.regressor.n_inputs());
        (0..q)
            .map(|d| {
                let lo = self.ssms.iter().map(|s| s.regressor.lower[d]).fold(f64::INFINITY, f64::min);
                let hi = self.ssms.iter().map(|s| s.regressor.upper[d]).fold(f64::NEG_INFINITY, f64::max);
                [lo, hi]
            })
            .collect()
    }
}

/// Wall time of one offline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub group: &'static str,
    pub stage: String,
    pub per_item_seconds: f64,
    pub items: usize,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub stages: Vec<StageTiming>,
    pub solution_objectives: Vec<f64>,
    pub geometry_objectives: Vec<f64>,
    pub not_converged: usize,
}

impl TrainReport {
    pub fn offline_total(&self) -> f64 {
        self.stages.iter().map(|s| s.total_seconds).sum()
    }
}

/// Deterministic per-item seed derived from the master seed.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a mixed key
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_SOLUTION: u64 = 1;
const TAG_GEOMETRY: u64 = 2;
const TAG_MATCH_SOLUTION: u64 = 3;
const TAG_MATCH_GEOMETRY: u64 = 4;

/// Runs `f` over `items` on up to `threads` scoped workers, keeping order.
fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| s.spawn(move || part.iter().enumerate().map(|(i, t)| f(c * chunk + i, t)).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Normalizes and splats one snapshot. Returns the decomposition and the
/// effective integral (raw integral times the fitted amplitude), so that
/// `integral * evaluate_cloud(cloud)` reconstructs the snapshot.
pub fn decompose_snapshot(
    snapshot: &FieldSample,
    config: &SurrogateConfig,
    seed: u64,
) -> Result<(splat::Decomposition, f64)> {
    let normalized = splat::normalize_field(snapshot)?;
    let integral = normalized.integral.unwrap_or(1.0);
    let opts = DecomposeOptions { seed, ..config.decompose.clone() };
    let d = splat::decompose(&normalized, config.n_s, config.sigma_s, None, &opts)?;
    let effective = integral * d.amplitude;
    Ok((d, effective))
}

/// Offline pipeline. `snapshots[k][p]` is the field of geometry `k` at
/// `params[k][p]`, sampled on the common reference grid of the domains.
pub fn train(
    geometries: &[GeometryDomain],
    snapshots: &[Vec<FieldSample>],
    params: &[Vec<Vec<f64>>],
    config: &SurrogateConfig,
    seed: u64,
) -> Result<(ModelContainer, TrainReport)> {
    config.validate()?;
    let k = geometries.len();
    if k == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if snapshots.len() != k || params.len() != k {
        return Err(Error::SizeMismatch(format!(
            "{k} geometries, {} snapshot sets, {} parameter sets",
            snapshots.len(),
            params.len()
        )));
    }
    let p = snapshots[0].len();
    if p < 2 {
        return Err(Error::InsufficientSnapshots(format!("need at least 2 snapshots per geometry, got {p}")));
    }
    for (s, t) in snapshots.iter().zip(params) {
        if s.len() != p || t.len() != p {
            return Err(Error::SizeMismatch("every geometry needs the same number of snapshots and parameters".into()));
        }
    }
    let grid = geometries[0].grid().unmasked();
    if geometries.iter().any(|g| !g.grid().same_lattice(&grid)) || snapshots.iter().flatten().any(|s| !s.grid.same_lattice(&grid))
    {
        return Err(Error::InvalidGrid("all domains and snapshots must share the reference grid".into()));
    }
    let mut report = TrainReport::default();

    // SSM decomposition
    let flat: Vec<&FieldSample> = snapshots.iter().flatten().collect();
    let t0 = Instant::now();
    let results = parallel_map(&flat, config.threads, |_, s| {
        decompose_snapshot(s, config, derive_seed(seed, TAG_SOLUTION, 0))
    });
    let mut clouds = Vec::with_capacity(flat.len());
    let mut integrals = Vec::with_capacity(flat.len());
    for r in results {
        let (d, integral) = r?;
        report.not_converged += d.did_not_converge as usize;
        report.solution_objectives.push(d.objective);
        clouds.push(d.cloud);
        integrals.push(integral);
    }
    let dt = t0.elapsed().as_secs_f64();
    report.stages.push(StageTiming {
        group: "SSM",
        stage: "Particle Decomposition".into(),
        per_item_seconds: dt / flat.len() as f64,
        items: flat.len(),
        total_seconds: dt,
    });

    // joint matching of all solution clouds
    let t0 = Instant::now();
    let ensemble = matching::match_multi(&clouds, &config.matching, derive_seed(seed, TAG_MATCH_SOLUTION, 0))?;
    let dt = t0.elapsed().as_secs_f64();
    report.stages.push(StageTiming {
        group: "SSM",
        stage: format!("P-Dimensional Matching (P = {})", clouds.len()),
        per_item_seconds: dt,
        items: 1,
        total_seconds: dt,
    });

    // one SSM per geometry
    let t0 = Instant::now();
    let mut ssms = Vec::with_capacity(k);
    for g in 0..k {
        let mine = &ensemble.clouds[g * p..(g + 1) * p];
        let snap = SnapshotMatrix::from_clouds(mine, params[g].clone())?;
        let (pod, coeffs) = regression::pod_fit(&snap, config.energy_threshold)?;
        let rows: Vec<Vec<f64>> = coeffs.row_iter().map(|r| r.iter().copied().collect()).collect();
        let regressor = regression::poly_fit(&params[g], &rows, &config.regressor)?;
        let ints = integrals[g * p..(g + 1) * p].to_vec();
        let integral_model = regression::integral_regressor_fit(&params[g], &ints, &config.regressor)?;
        ssms.push(Ssm {
            geometry: g,
            n_s: config.n_s,
            sigma_s: config.sigma_s,
            pod,
            regressor,
            integral_model,
            params: params[g].clone(),
            integrals: ints,
        });
    }
    let dt = t0.elapsed().as_secs_f64();
    report.stages.push(StageTiming {
        group: "SSM",
        stage: "SSM Training".into(),
        per_item_seconds: dt / k as f64,
        items: k,
        total_seconds: dt,
    });

    // SGM
    let t0 = Instant::now();
    let geo = parallel_map(geometries, config.threads, |_, g| {
        let opts = DecomposeOptions { seed: derive_seed(seed, TAG_GEOMETRY, 0), ..config.decompose.clone() };
        geometry::reparameterize(g, config.n_g, config.sigma_g, &opts)
    });
    let mut geo_clouds = Vec::with_capacity(k);
    for r in geo {
        let d = r?;
        report.not_converged += d.did_not_converge as usize;
        report.geometry_objectives.push(d.objective);
        geo_clouds.push(d.cloud);
    }
    let dt = t0.elapsed().as_secs_f64();
    report.stages.push(StageTiming {
        group: "SGM",
        stage: "Particle Decomposition".into(),
        per_item_seconds: dt / k as f64,
        items: k,
        total_seconds: dt,
    });
    let t0 = Instant::now();
    let geo_ensemble = matching::match_multi(&geo_clouds, &config.matching, derive_seed(seed, TAG_MATCH_GEOMETRY, 0))?;
    let dt = t0.elapsed().as_secs_f64();
    report.stages.push(StageTiming {
        group: "SGM",
        stage: format!("K-Dimensional Matching (K = {k})"),
        per_item_seconds: dt,
        items: 1,
        total_seconds: dt,
    });

    let box_max = grid.max_corner();
    let sgm = Sgm {
        ensemble: geo_ensemble,
        sigma_g: config.sigma_g,
        n_g: config.n_g,
        box_min: grid.origin,
        box_max,
        polygons: geometries.iter().map(|g| g.boundary.clone()).collect(),
        masks: geometries.iter().map(|g| g.interior_mask()).collect(),
    };
    let model = ModelContainer {
        config: config.clone(),
        grid,
        sgm,
        ssms,
        solution_orderings: ensemble.orderings,
        solution_clouds: ensemble.clouds,
        provenance: Provenance { seed, crate_version: env!("CARGO_PKG_VERSION").to_string() },
    };
    Ok((model, report))
}

/// Result of an online query.
#[derive(Debug, Clone)]
pub struct Inference {
    /// Predicted field, zero outside the (possibly blended) domain mask.
    pub field: FieldSample,
    /// Geometry level-set of the queried domain (max-rescaled).
    pub levelset: FieldSample,
    pub cloud: ParticleCloud,
    pub integral: f64,
    /// Set when a negative integral prediction was clamped to zero.
    pub clamped: bool,
}

fn masked_field(model: &ModelContainer, cloud: &ParticleCloud, integral: f64, mask: Vec<bool>) -> Result<FieldSample> {
    let mut field = splat::evaluate_cloud_truncated(cloud, &model.grid, model.config.inference_cutoff);
    for v in &mut field.values {
        *v *= integral;
    }
    let mut field = field.with_mask(mask)?;
    field.zero_outside_mask();
    Ok(field)
}

fn check_theta(model: &ModelContainer, theta: &[f64]) -> Result<()> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("parameters must be finite".into()));
    }
    let q = model.ssms.first().map_or(0, |s| s.regressor.n_inputs());
    if theta.len() != q {
        return Err(Error::InvalidParameter(format!("expected {q} parameters, got {}", theta.len())));
    }
    Ok(())
}

/// Field on sampled geometry `k` at parameters `theta`.
pub fn infer_fixed_geometry(model: &ModelContainer, k: usize, theta: &[f64]) -> Result<Inference> {
    let ssm = model
        .ssms
        .get(k)
        .ok_or_else(|| Error::InvalidParameter(format!("geometry index {k} out of range ({} geometries)", model.k())))?;
    check_theta(model, theta)?;
    let (cloud, integral, clamped) = ssm.predict(theta)?;
    let field = masked_field(model, &cloud, integral, model.sgm.masks[k].clone())?;
    let levelset = geometry::levelset_from_cloud(&model.sgm.ensemble.clouds[k], &model.grid);
    Ok(Inference { field, levelset, cloud, integral, clamped })
}

/// Field on the barycentric domain with weights `w` at parameters `theta`.
///
/// One-hot weights select a sampled domain, whose stored interior mask is
/// used; other weights mask to `{levelset >= 0.5}` of the blended domain.
pub fn infer_cross_geometry(model: &ModelContainer, theta: &[f64], w: &BarycentricWeights) -> Result<Inference> {
    if w.len() != model.k() {
        return Err(Error::BadWeights(format!("expected {} weights, got {}", model.k(), w.len())));
    }
    check_theta(model, theta)?;
    let n = model.config.n_s;
    let mut centers = vec![[0.0; 2]; n];
    let mut integral = 0.0;
    let mut clamped = false;
    for (ssm, &wk) in model.ssms.iter().zip(w.as_slice()) {
        if wk == 0.0 {
            continue;
        }
        let (cloud, ik, c) = ssm.predict(theta)?;
        clamped |= c;
        integral += wk * ik;
        for (acc, x) in centers.iter_mut().zip(&cloud.centers) {
            acc[0] += wk * x[0];
            acc[1] += wk * x[1];
        }
    }
    let cloud = ParticleCloud::new(centers, model.config.sigma_s)?;
    let geo_cloud = geometry::barycenter(&model.sgm.ensemble, w)?;
    let levelset = geometry::levelset_from_cloud(&geo_cloud, &model.grid);
    let mask = match w.one_hot_index() {
        Some(k) => model.sgm.masks[k].clone(),
        None => geometry::levelset_mask(&levelset),
    };
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyInterior);
    }
    let field = masked_field(model, &cloud, integral, mask)?;
    Ok(Inference { field, levelset, cloud, integral, clamped })
}

/// Polygon of the blended domain: the 0.5 contour of its level-set.
pub fn blended_polygon(model: &ModelContainer, w: &BarycentricWeights) -> Result<Polygon> {
    if let Some(k) = w.one_hot_index() {
        return Ok(model.sgm.polygons[k].clone());
    }
    let cloud = geometry::barycenter(&model.sgm.ensemble, w)?;
    geometry::contour_polygon(&geometry::levelset_from_cloud(&cloud, &model.grid), 0.5)
}

/// Node-wise `(pred - ref) / sqrt(int ref^2 / area)` over the reference mask.
pub fn relative_error(predicted: &FieldSample, reference: &FieldSample) -> Result<FieldSample> {
    if !predicted.grid.same_lattice(&reference.grid) || predicted.grid.mask != reference.grid.mask {
        return Err(Error::SizeMismatch("relative error needs fields on the same grid and mask".into()));
    }
    let area = reference.grid.masked_area();
    let denom = (reference.quadrature_sq() / area).sqrt();
    if !(denom >= 1e-14) {
        return Err(Error::InvalidParameter(format!("reference field is zero (rms {denom:e})")));
    }
    let values = predicted
        .values
        .iter()
        .zip(&reference.values)
        .zip(&reference.grid.mask)
        .map(|((p, r), &m)| if m { (p - r) / denom } else { 0.0 })
        .collect();
    FieldSample::new(reference.grid.clone(), values)
}

/// Same fields restricted to the intersection of their masks.
pub fn on_common_mask(a: &FieldSample, b: &FieldSample) -> Result<(FieldSample, FieldSample)> {
    if !a.grid.same_lattice(&b.grid) {
        return Err(Error::SizeMismatch("fields live on different lattices".into()));
    }
    let mask: Vec<bool> = a.grid.mask.iter().zip(&b.grid.mask).map(|(x, y)| *x && *y).collect();
    Ok((a.with_mask(mask.clone())?, b.with_mask(mask)?))
}

/// Mean distance from each parameter vector to its nearest neighbour.
pub fn mean_nearest_neighbor_distance(params: &[Vec<f64>]) -> f64 {
    if params.len() < 2 {
        return 1.0;
    }
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let total: f64 = params
        .iter()
        .enumerate()
        .map(|(i, a)| {
            params
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| d(a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / params.len() as f64
}

/// Gaussian-weighted average of snapshots in parameter space.
pub fn idw_baseline(snapshots: &[FieldSample], params: &[Vec<f64>], theta: &[f64], rbf_scale: f64) -> Result<FieldSample> {
    let first = snapshots.first().ok_or(Error::EmptyEnsemble)?;
    if snapshots.len() != params.len() {
        return Err(Error::SizeMismatch(format!("{} snapshots, {} parameter vectors", snapshots.len(), params.len())));
    }
    if snapshots.iter().any(|s| !s.grid.same_lattice(&first.grid)) {
        return Err(Error::InvalidGrid("snapshots must share a grid".into()));
    }
    if !(rbf_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("rbf_scale must be positive, got {rbf_scale}")));
    }
    let d2: Vec<f64> = params.iter().map(|t| t.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum()).collect();
    if let Some(i) = d2.iter().position(|&d| d == 0.0) {
        return Ok(snapshots[i].clone());
    }
    // shift exponents by the smallest distance to avoid underflow
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d2.iter().map(|d| (-(d - dmin) / (2.0 * rbf_scale * rbf_scale)).exp()).collect();
    let wsum: f64 = w.iter().sum();
    let mut values = vec![0.0; first.values.len()];
    for (s, wi) in snapshots.iter().zip(&w) {
        for (v, x) in values.iter_mut().zip(&s.values) {
            *v += wi * x;
        }
    }
    for v in &mut values {
        *v /= wsum;
    }
    FieldSample::new(first.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::over_box([0.0, 0.0], [1.0, 1.0], 11, 11).unwrap()
    }

    #[test]
    fn relative_error_closed_forms() {
        let g = grid();
        let r = FieldSample::new(g.clone(), vec![2.0; g.len()]).unwrap();
        let p = FieldSample::new(g.clone(), vec![2.5; g.len()]).unwrap();
        let e = relative_error(&p, &r).unwrap();
        assert!(e.values.iter().all(|v| (v - 0.25).abs() < 1e-14));
        let z = relative_error(&r, &r).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(relative_error(&r, &FieldSample::zeros(g)).is_err());
    }

    #[test]
    fn idw_short_circuit_and_midpoint() {
        let g = grid();
        let a = FieldSample::new(g.clone(), vec![1.0; g.len()]).unwrap();
        let b = FieldSample::new(g.clone(), vec![3.0; g.len()]).unwrap();
        let params = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let snaps = [a.clone(), b];
        assert_eq!(idw_baseline(&snaps, &params, &[0.0, 0.0], 0.3).unwrap(), a);
        let mid = idw_baseline(&snaps, &params, &[0.5, 0.7], 0.3).unwrap();
        assert!(mid.values.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn nearest_neighbor_scale() {
        let p = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert!((mean_nearest_neighbor_distance(&p) - (1.0 + 1.0 + 2.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 1, 1));
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 2, 0));
        assert_eq!(derive_seed(7, 3, 9), derive_seed(7, 3, 9));
    }
}
