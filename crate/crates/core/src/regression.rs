//! POD compression of matched particle snapshots and sparse separable
//! polynomial regression over the parameter space.
//!
//! A regressor output is a sum of rank-one terms, each a product of 1D
//! Legendre expansions (one per parameter dimension, parameters mapped to
//! `[-1, 1]` over the training box). Terms are added greedily; each new term
//! is fitted to the current residual by alternating least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splat::ParticleCloud;

/// Stacked particle coordinates, one column per snapshot, with the
/// parameter vector of each column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub params: Vec<Vec<f64>>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>, params: Vec<Vec<f64>>) -> Result<Self> {
        if data.ncols() != params.len() {
            return Err(Error::SizeMismatch(format!(
                "{} snapshot columns but {} parameter vectors",
                data.ncols(),
                params.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) || params.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NaNField);
        }
        if let Some(q) = params.first().map(Vec::len) {
            if params.iter().any(|p| p.len() != q) {
                return Err(Error::SizeMismatch("parameter vectors differ in length".into()));
            }
        }
        Ok(Self { data, params })
    }

    /// Column `p` holds `x0, y0, x1, y1, ...` of cloud `p`.
    pub fn from_clouds(clouds: &[ParticleCloud], params: Vec<Vec<f64>>) -> Result<Self> {
        let n = clouds.first().ok_or(Error::EmptyEnsemble)?.n_particles();
        if clouds.iter().any(|c| c.n_particles() != n) {
            return Err(Error::SizeMismatch("clouds differ in particle count".into()));
        }
        let data = DMatrix::from_fn(2 * n, clouds.len(), |r, c| clouds[c].centers[r / 2][r % 2]);
        Self::new(data, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    /// Row-major `rows x rank` mode matrix.
    pub modes: Vec<f64>,
    pub rows: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub energy_threshold: f64,
    /// Set when the trailing singular values vanish.
    pub rank_deficient: bool,
}

impl PodBasis {
    pub fn modes_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.rank, &self.modes)
    }

    /// `U alpha` for a coefficient vector of length `rank`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.modes[i * self.rank..(i + 1) * self.rank];
            *o = row.iter().zip(coeffs).map(|(u, a)| u * a).sum();
        }
        out
    }

    /// `U^T x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rank];
        for (i, xi) in x.iter().enumerate() {
            let row = &self.modes[i * self.rank..(i + 1) * self.rank];
            for (o, u) in out.iter_mut().zip(row) {
                *o += u * xi;
            }
        }
        out
    }

    pub fn retained_energy(&self) -> f64 {
        energy_fraction(&self.singular_values, self.rank)
    }
}

fn energy_fraction(sv: &[f64], r: usize) -> f64 {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1.0;
    }
    sv[..r].iter().map(|s| s * s).sum::<f64>() / total
}

/// Smallest rank whose squared singular values carry `threshold` of the
/// total energy.
pub fn energy_rank(sv: &[f64], threshold: f64) -> usize {
    (1..=sv.len()).find(|&r| energy_fraction(sv, r) >= threshold).unwrap_or(sv.len()).max(1)
}

/// Thin SVD of the snapshot matrix truncated by the energy criterion.
/// Returns the basis and the `rank x P` coefficient matrix `U^T data`.
pub fn pod_fit(snap: &SnapshotMatrix, energy_threshold: f64) -> Result<(PodBasis, DMatrix<f64>)> {
    if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("energy threshold must be in (0, 1], got {energy_threshold}")));
    }
    let p = snap.data.ncols();
    if p < 2 {
        return Err(Error::InsufficientSnapshots(format!("POD needs at least 2 snapshots, got {p}")));
    }
    let svd = snap.data.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::SingularSystem("SVD did not return left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let rank = energy_rank(&sv, energy_threshold);
    let rows = snap.data.nrows();
    let mut modes = vec![0.0; rows * rank];
    for (c, &k) in order.iter().take(rank).enumerate() {
        for r in 0..rows {
            modes[r * rank + c] = u[(r, k)];
        }
    }
    let s0 = sv.first().copied().unwrap_or(0.0);
    let rank_deficient = sv.iter().any(|&s| s <= 1e-13 * s0);
    let basis = PodBasis { modes, rows, rank, singular_values: sv, energy_threshold, rank_deficient };
    let coeffs = basis.modes_matrix().transpose() * &snap.data;
    Ok((basis, coeffs))
}

/// Legendre polynomials `P_0..=P_degree` at `x`.
pub fn legendre(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
    }
    for n in 1..degree {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// Rank-one separable term: one coefficient vector per parameter dimension.
pub type SeparableTerm = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableModel {
    /// Targets were divided by this before fitting.
    pub scale: f64,
    pub terms: Vec<SeparableTerm>,
    /// Relative training residual after 0, 1, ... terms.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressorOptions {
    pub max_degree: usize,
    /// Relative change in training predictions below which enrichment stops.
    pub tolerance: f64,
    pub max_terms: usize,
    pub als_iterations: usize,
}

impl Default for RegressorOptions {
    fn default() -> Self {
        Self { max_degree: 3, tolerance: 1e-2, max_terms: 10, als_iterations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyRegressor {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Degree actually used (may be below the requested maximum for small
    /// training sets).
    pub degree: usize,
    pub outputs: Vec<SeparableModel>,
    /// Set when a least-squares system needed the ridge fallback.
    pub ill_conditioned: bool,
}

impl PolyRegressor {
    pub fn n_inputs(&self) -> usize {
        self.lower.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&lo, &hi))| if hi > lo { 2.0 * (t - lo) / (hi - lo) - 1.0 } else { 0.0 })
            .collect()
    }

    pub fn is_extrapolation(&self, theta: &[f64]) -> bool {
        theta.iter().zip(self.lower.iter().zip(&self.upper)).any(|(&t, (&lo, &hi))| t < lo || t > hi)
    }

    pub fn predict(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n_inputs() {
            return Err(Error::SizeMismatch(format!("expected {} parameters, got {}", self.n_inputs(), theta.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        if self.is_extrapolation(theta) {
            log::warn!("parameters {theta:?} lie outside the training box; extrapolating");
        }
        let basis = self.basis_at(&self.to_unit(theta));
        Ok(self.outputs.iter().map(|m| eval_model(m, &basis)).collect())
    }

    fn basis_at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|&xq| {
                let mut b = vec![0.0; self.degree + 1];
                legendre(xq, self.degree, &mut b);
                b
            })
            .collect()
    }
}

fn eval_term(term: &SeparableTerm, basis: &[Vec<f64>]) -> f64 {
    term.iter()
        .zip(basis)
        .map(|(c, b)| c.iter().zip(b).map(|(ci, bi)| ci * bi).sum::<f64>())
        .product()
}

fn eval_model(m: &SeparableModel, basis: &[Vec<f64>]) -> f64 {
    m.scale * m.terms.iter().map(|t| eval_term(t, basis)).sum::<f64>()
}

/// Largest usable degree so that a rank-one term (`Q * degree + 1` free
/// coefficients) stays overdetermined by `P` samples.
pub fn admissible_degree(p: usize, q: usize, max_degree: usize) -> Result<usize> {
    if p < 2 {
        return Err(Error::Underdetermined(format!("{p} training samples cannot determine a regressor")));
    }
    if q == 0 {
        return Ok(0);
    }
    let mut d = max_degree;
    while d > 0 && q * d + 1 >= p {
        d -= 1;
    }
    Ok(d)
}

/// Least squares `min |A c - b|^2` through the normal equations, with a
/// ridge fallback when their condition number exceeds 1e12.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, flagged: &mut bool) -> DVector<f64> {
    let mut ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let eig = SymmetricEigen::new(ata.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()));
    if max == 0.0 {
        return DVector::zeros(a.ncols());
    }
    if min == 0.0 || max / min > 1e12 {
        *flagged = true;
        let ridge = 1e-8 * max;
        for i in 0..ata.nrows() {
            ata[(i, i)] += ridge;
        }
    }
    match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => ata.lu().solve(&atb).unwrap_or_else(|| DVector::zeros(a.ncols())),
    }
}

/// Greedy rank-one enrichment with alternating least squares, one separable
/// model per row of `targets` (each row holds one value per training sample).
pub fn poly_fit(params: &[Vec<f64>], targets: &[Vec<f64>], opts: &RegressorOptions) -> Result<PolyRegressor> {
    let p = params.len();
    let q = params.first().map(Vec::len).ok_or_else(|| Error::Underdetermined("no training samples".into()))?;
    if params.iter().any(|t| t.len() != q) {
        return Err(Error::SizeMismatch("parameter vectors differ in length".into()));
    }
    if let Some(row) = targets.iter().find(|row| row.len() != p) {
        return Err(Error::SizeMismatch(format!("target row has {} values for {p} samples", row.len())));
    }
    if targets.iter().flatten().chain(params.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NaNField);
    }
    let degree = admissible_degree(p, q, opts.max_degree)?;
    if degree < opts.max_degree {
        log::warn!("regressor degree reduced from {} to {degree} for {p} samples", opts.max_degree);
    }
    let mut lower = vec![f64::INFINITY; q];
    let mut upper = vec![f64::NEG_INFINITY; q];
    for t in params {
        for k in 0..q {
            lower[k] = lower[k].min(t[k]);
            upper[k] = upper[k].max(t[k]);
        }
    }
    let mut model = PolyRegressor { lower, upper, degree, outputs: Vec::new(), ill_conditioned: false };
    // basis[s][k] = Legendre values of sample s in dimension k
    let basis: Vec<Vec<Vec<f64>>> = params.iter().map(|t| model.basis_at(&model.to_unit(t))).collect();
    let mut flagged = false;
    for row in targets {
        model.outputs.push(fit_one(row, &basis, q, degree, opts, &mut flagged));
    }
    model.ill_conditioned = flagged;
    Ok(model)
}

fn fit_one(
    row: &[f64],
    basis: &[Vec<Vec<f64>>],
    q: usize,
    degree: usize,
    opts: &RegressorOptions,
    flagged: &mut bool,
) -> SeparableModel {
    let p = row.len();
    let scale = (row.iter().map(|v| v * v).sum::<f64>() / p as f64).sqrt();
    if scale == 0.0 {
        return SeparableModel { scale: 0.0, terms: Vec::new(), residual_history: vec![0.0] };
    }
    let target: Vec<f64> = row.iter().map(|v| v / scale).collect();
    let tnorm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut residual = target.clone();
    let mut terms: Vec<SeparableTerm> = Vec::new();
    let mut history = vec![1.0];
    let nb = degree + 1;
    while terms.len() < opts.max_terms {
        let mut term: SeparableTerm = (0..q)
            .map(|_| {
                let mut c = vec![0.0; nb];
                c[0] = 1.0;
                c
            })
            .collect();
        let mut last = f64::INFINITY;
        for _ in 0..opts.als_iterations.max(1) {
            for k in 0..q {
                // product of the other factors at every sample
                let others: Vec<f64> = (0..p)
                    .map(|s| {
                        (0..q)
                            .filter(|&j| j != k)
                            .map(|j| term[j].iter().zip(&basis[s][j]).map(|(c, b)| c * b).sum::<f64>())
                            .product()
                    })
                    .collect();
                let a = DMatrix::from_fn(p, nb, |s, d| basis[s][k][d] * others[s]);
                let b = DVector::from_column_slice(&residual);
                let c = least_squares(&a, &b, flagged);
                term[k] = c.iter().copied().collect();
            }
            let err: f64 = (0..p).map(|s| (residual[s] - eval_term(&term, &basis[s])).powi(2)).sum();
            if last.is_finite() && (last - err).abs() <= 1e-12 * last.max(1e-300) {
                break;
            }
            last = err;
        }
        let values: Vec<f64> = (0..p).map(|s| eval_term(&term, &basis[s])).collect();
        let change = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (r, v) in residual.iter_mut().zip(&values) {
            *r -= v;
        }
        terms.push(term);
        history.push(residual.iter().map(|v| v * v).sum::<f64>().sqrt() / tnorm);
        if change < opts.tolerance * tnorm {
            break;
        }
    }
    SeparableModel { scale, terms, residual_history: history }
}

/// Regressor of a scalar per sample (for example the field integrals).
pub fn integral_regressor_fit(params: &[Vec<f64>], integrals: &[f64], opts: &RegressorOptions) -> Result<PolyRegressor> {
    poly_fit(params, &[integrals.to_vec()], opts)
}

pub fn integral_regressor_predict(model: &PolyRegressor, theta: &[f64]) -> Result<f64> {
    Ok(model.predict(theta)?[0])
}
