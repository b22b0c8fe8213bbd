//! Consistent particle orderings across clouds.
//!
//! Two clouds are matched exactly by linear assignment under squared
//! Euclidean cost ([`match_pair`]). Ensembles of `P > 2` clouds form a
//! multidimensional assignment problem, solved heuristically by
//! [`match_multi`]; [`brute_force_match`] enumerates tiny instances.

mod genetic;
pub mod lap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splat::ParticleCloud;

pub use genetic::MultiMatchConfig;

/// A bijection on particle indices and the cost it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Particle `n` of the first cloud is paired with particle
    /// `permutation[n]` of the second.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Clouds whose rows correspond: row `n` is the same particle in every cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEnsemble {
    pub clouds: Vec<ParticleCloud>,
    pub total_cost: f64,
    /// Applied permutations for clouds `1..P`: row `n` of matched cloud `p`
    /// is row `orderings[p - 1][n]` of the input cloud `p`.
    pub orderings: Vec<Vec<usize>>,
    /// Best total cost after each heuristic generation (empty when exact).
    pub history: Vec<f64>,
}

impl MatchedEnsemble {
    pub fn n_particles(&self) -> usize {
        self.clouds.first().map_or(0, |c| c.n_particles())
    }

    /// Total pairwise cost recomputed from the stored clouds.
    pub fn recomputed_cost(&self) -> f64 {
        ensemble_cost_direct(&self.clouds)
    }
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&k| k < seen.len() && !std::mem::replace(&mut seen[k], true))
}

fn check_sizes(a: &ParticleCloud, b: &ParticleCloud) -> Result<()> {
    if a.n_particles() != b.n_particles() {
        return Err(Error::SizeMismatch(format!(
            "clouds have {} and {} particles",
            a.n_particles(),
            b.n_particles()
        )));
    }
    Ok(())
}

#[inline]
fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    dx * dx + dy * dy
}

/// `sum_n |a[n] - b[perm[n]]|^2`.
pub fn pairwise_cost(a: &ParticleCloud, b: &ParticleCloud, perm: &[usize]) -> Result<f64> {
    check_sizes(a, b)?;
    if perm.len() != a.n_particles() || !is_permutation(perm) {
        return Err(Error::SizeMismatch("permutation is not a bijection on the particle indices".into()));
    }
    Ok(a.centers.iter().zip(perm).map(|(p, &k)| dist2(*p, b.centers[k])).sum())
}

/// Dense squared-distance cost matrix, row-major over `a` x `b`.
pub fn cost_matrix(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for p in a {
        c.extend(b.iter().map(|q| dist2(*p, *q)));
    }
    c
}

/// Exact optimal assignment between two equal-size clouds.
pub fn match_pair(a: &ParticleCloud, b: &ParticleCloud) -> Result<Assignment> {
    check_sizes(a, b)?;
    let n = a.n_particles();
    let costs = cost_matrix(&a.centers, &b.centers);
    let permutation = lap::solve(&costs, n);
    let cost = permutation.iter().enumerate().map(|(i, &j)| costs[i * n + j]).sum();
    Ok(Assignment { permutation, cost })
}

/// `sum_{p < p'} sum_n |x_p[n] - x_p'[n]|^2` by direct double loop.
pub fn ensemble_cost_direct(clouds: &[ParticleCloud]) -> f64 {
    let mut total = 0.0;
    for p in 0..clouds.len() {
        for q in p + 1..clouds.len() {
            total += clouds[p]
                .centers
                .iter()
                .zip(&clouds[q].centers)
                .map(|(a, b)| dist2(*a, *b))
                .sum::<f64>();
        }
    }
    total
}

fn validate_ensemble(clouds: &[ParticleCloud]) -> Result<usize> {
    let first = clouds.first().ok_or(Error::EmptyEnsemble)?;
    for c in &clouds[1..] {
        check_sizes(first, c)?;
    }
    Ok(first.n_particles())
}

fn apply_orderings(clouds: &[ParticleCloud], orderings: &[Vec<usize>]) -> Vec<ParticleCloud> {
    let mut out = Vec::with_capacity(clouds.len());
    out.push(clouds[0].clone());
    out.extend(clouds[1..].iter().zip(orderings).map(|(c, o)| c.permuted(o)));
    out
}

/// Heuristic multimarginal matching of `P` equal-size clouds.
///
/// `P = 1` is returned unchanged and `P = 2` is solved exactly; larger
/// ensembles go through the genetic search described on
/// [`MultiMatchConfig`]. Deterministic for a given seed.
pub fn match_multi(clouds: &[ParticleCloud], config: &MultiMatchConfig, seed: u64) -> Result<MatchedEnsemble> {
    validate_ensemble(clouds)?;
    config.validate()?;
    match clouds.len() {
        1 => Ok(MatchedEnsemble { clouds: clouds.to_vec(), total_cost: 0.0, orderings: Vec::new(), history: Vec::new() }),
        2 => {
            let a = match_pair(&clouds[0], &clouds[1])?;
            let matched = apply_orderings(clouds, std::slice::from_ref(&a.permutation));
            Ok(MatchedEnsemble { clouds: matched, total_cost: a.cost, orderings: vec![a.permutation], history: Vec::new() })
        }
        _ => {
            let (orderings, history) = genetic::search(clouds, config, seed);
            let matched = apply_orderings(clouds, &orderings);
            let total_cost = ensemble_cost_direct(&matched);
            Ok(MatchedEnsemble { clouds: matched, total_cost, orderings, history })
        }
    }
}

/// Orderings obtained by matching cloud `p` to cloud `p + 1` exactly and
/// composing along the chain.
pub fn chained_pairwise(clouds: &[ParticleCloud]) -> Result<Vec<Vec<usize>>> {
    validate_ensemble(clouds)?;
    let n = clouds[0].n_particles();
    let mut orderings: Vec<Vec<usize>> = Vec::with_capacity(clouds.len().saturating_sub(1));
    let mut prev: Vec<usize> = (0..n).collect();
    for p in 1..clouds.len() {
        let a = match_pair(&clouds[p - 1], &clouds[p])?;
        let next: Vec<usize> = prev.iter().map(|&k| a.permutation[k]).collect();
        orderings.push(next.clone());
        prev = next;
    }
    Ok(orderings)
}

/// Upper bound on the enumeration size accepted by [`brute_force_match`].
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Globally optimal ensemble matching by exhaustive enumeration of all
/// `(N!)^(P-1)` ordering tuples. Ties keep the lexicographically first tuple.
pub fn brute_force_match(clouds: &[ParticleCloud]) -> Result<MatchedEnsemble> {
    let n = validate_ensemble(clouds)?;
    let p = clouds.len();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let size = fact.powi(p as i32 - 1);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(size, BRUTE_FORCE_LIMIT));
    }
    let perms = lexicographic_permutations(n);
    let mut idx = vec![0usize; p - 1];
    let mut best_cost = f64::INFINITY;
    let mut best = idx.clone();
    let mut rows: Vec<[f64; 2]> = vec![[0.0; 2]; p];
    loop {
        let mut cost = 0.0;
        for r in 0..n {
            rows[0] = clouds[0].centers[r];
            for q in 1..p {
                rows[q] = clouds[q].centers[perms[idx[q - 1]][r]];
            }
            for a in 0..p {
                for b in a + 1..p {
                    cost += dist2(rows[a], rows[b]);
                }
            }
        }
        if cost < best_cost {
            best_cost = cost;
            best.clone_from(&idx);
        }
        // odometer increment, last cloud fastest
        let mut k = p - 1;
        loop {
            if k == 0 {
                let orderings: Vec<Vec<usize>> = best.iter().map(|&i| perms[i].clone()).collect();
                let matched = apply_orderings(clouds, &orderings);
                let total_cost = ensemble_cost_direct(&matched);
                return Ok(MatchedEnsemble { clouds: matched, total_cost, orderings, history: Vec::new() });
            }
            idx[k - 1] += 1;
            if idx[k - 1] < perms.len() {
                break;
            }
            idx[k - 1] = 0;
            k -= 1;
        }
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| p[k] < p[k + 1]) else {
            return out;
        };
        let l = (k + 1..n).rev().find(|&l| p[k] < p[l]).expect("successor exists");
        p.swap(k, l);
        p[k + 1..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> ParticleCloud {
        ParticleCloud::new((0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect(), 0.05).unwrap()
    }

    #[test]
    fn identical_clouds_match_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_cloud(&mut rng, 12);
        let m = match_pair(&a, &a).unwrap();
        assert_eq!(m.permutation, (0..12).collect::<Vec<_>>());
        assert_eq!(m.cost, 0.0);
    }

    #[test]
    fn translation_cost_is_n_times_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_cloud(&mut rng, 6);
        let t = [0.3, -0.1];
        let b = ParticleCloud::new(a.centers.iter().map(|c| [c[0] + t[0], c[1] + t[1]]).collect(), 0.05).unwrap();
        let id: Vec<usize> = (0..6).collect();
        let c = pairwise_cost(&a, &b, &id).unwrap();
        assert!((c - 6.0 * (0.09 + 0.01)).abs() < 1e-12);
        let m = match_pair(&a, &b).unwrap();
        assert_eq!(m.permutation, id);
        assert!((m.cost - 0.6).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cloud(&mut rng, 3);
        let b = random_cloud(&mut rng, 4);
        assert!(matches!(match_pair(&a, &b), Err(Error::SizeMismatch(_))));
        assert!(matches!(pairwise_cost(&a, &a, &[0, 0, 1]), Err(Error::SizeMismatch(_))));
        assert!(matches!(match_multi(&[], &MultiMatchConfig::default(), 0), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn brute_force_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let clouds: Vec<_> = (0..3).map(|_| random_cloud(&mut rng, 9)).collect();
        assert!(matches!(brute_force_match(&clouds), Err(Error::TooLarge(..))));
    }

    #[test]
    fn single_particle_ensemble_cost_is_sum_of_squared_distances() {
        let clouds: Vec<_> = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]
            .iter()
            .map(|&c| ParticleCloud::new(vec![c], 0.1).unwrap())
            .collect();
        let e = brute_force_match(&clouds).unwrap();
        assert!((e.total_cost - (1.0 + 4.0 + 5.0)).abs() < 1e-15);
    }

    #[test]
    fn permutations_are_lexicographic() {
        let p = lexicographic_permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }
}
