//! Genetic search for the multidimensional assignment problem.
//!
//! A genome holds one permutation per cloud after the first. The total cost
//! is evaluated in `O(N P)` through
//! `sum_{p<q} |a_p - a_q|^2 = P sum_p |a_p|^2 - |sum_p a_p|^2`
//! applied row by row.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lap;
use crate::error::{Error, Result};
use crate::splat::ParticleCloud;

/// Settings for the multimarginal heuristic.
///
/// The search starts from the chained pairwise solution, polishes it with
/// block-coordinate sweeps (each cloud re-assigned exactly against the mean
/// of the others), then runs a generational GA with tournament selection,
/// order crossover per permutation, swap mutation and elitism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiMatchConfig {
    pub population: usize,
    pub tournament: usize,
    pub elitism: usize,
    pub crossover_rate: f64,
    /// Expected swaps per permutation; the per-position rate is this over N.
    pub mutation_swaps: f64,
    pub max_generations: usize,
    /// Window over which the best-cost decrease is measured.
    pub stall_generations: usize,
    /// Absolute cost-decrease threshold.
    pub abs_threshold: f64,
    /// Relative threshold, as a fraction of the initial cost.
    pub rel_threshold: f64,
    /// Cap on block-coordinate polishing sweeps (0 disables polishing).
    pub refine_sweeps: usize,
}

impl Default for MultiMatchConfig {
    fn default() -> Self {
        Self {
            population: 64,
            tournament: 3,
            elitism: 2,
            crossover_rate: 0.9,
            mutation_swaps: 2.0,
            max_generations: 400,
            stall_generations: 20,
            abs_threshold: 1e2,
            rel_threshold: 1e-4,
            refine_sweeps: 8,
        }
    }
}

impl MultiMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.tournament == 0 || self.elitism >= self.population {
            return Err(Error::Config(
                "GA needs population >= 2, tournament >= 1 and elitism < population".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || self.mutation_swaps < 0.0 {
            return Err(Error::Config("crossover_rate must lie in [0, 1] and mutation_swaps >= 0".into()));
        }
        if self.abs_threshold < 0.0 || self.rel_threshold < 0.0 {
            return Err(Error::Config("convergence thresholds must be non-negative".into()));
        }
        Ok(())
    }

    fn threshold(&self, initial_cost: f64) -> f64 {
        self.abs_threshold.max(self.rel_threshold * initial_cost)
    }
}

struct Problem {
    /// Centered coordinates per cloud.
    xs: Vec<Vec<[f64; 2]>>,
    n: usize,
    constant: f64,
}

impl Problem {
    fn new(clouds: &[ParticleCloud]) -> Self {
        let p = clouds.len();
        let n = clouds[0].n_particles();
        let mut mean = [0.0; 2];
        for c in clouds {
            for x in &c.centers {
                mean[0] += x[0];
                mean[1] += x[1];
            }
        }
        let total = (p * n) as f64;
        mean = [mean[0] / total, mean[1] / total];
        let xs: Vec<Vec<[f64; 2]>> = clouds
            .iter()
            .map(|c| c.centers.iter().map(|x| [x[0] - mean[0], x[1] - mean[1]]).collect())
            .collect();
        let sq: f64 = xs.iter().flatten().map(|x| x[0] * x[0] + x[1] * x[1]).sum();
        Self { constant: p as f64 * sq, xs, n }
    }

    fn p(&self) -> usize {
        self.xs.len()
    }

    fn row_sums(&self, genome: &[Vec<usize>]) -> Vec<[f64; 2]> {
        let mut s: Vec<[f64; 2]> = self.xs[0].clone();
        for (cloud, perm) in self.xs[1..].iter().zip(genome) {
            for (acc, &k) in s.iter_mut().zip(perm) {
                acc[0] += cloud[k][0];
                acc[1] += cloud[k][1];
            }
        }
        s
    }

    fn cost(&self, genome: &[Vec<usize>]) -> f64 {
        let s = self.row_sums(genome);
        (self.constant - s.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()).max(0.0)
    }

    /// One pass re-assigning each cloud optimally against the mean of the
    /// others. Never increases the cost.
    fn sweep(&self, genome: &mut [Vec<usize>]) {
        let n = self.n;
        let p = self.p();
        let mut full: Vec<Vec<usize>> = Vec::with_capacity(p);
        full.push((0..n).collect());
        full.extend(genome.iter().cloned());
        let mut s = self.row_sums(genome);
        let inv = 1.0 / (p - 1) as f64;
        let mut costs = vec![0.0; n * n];
        for q in 0..p {
            let cloud = &self.xs[q];
            for (row, (sum, &k)) in s.iter().zip(&full[q]).enumerate() {
                let m = [(sum[0] - cloud[k][0]) * inv, (sum[1] - cloud[k][1]) * inv];
                for (j, x) in cloud.iter().enumerate() {
                    let dx = m[0] - x[0];
                    let dy = m[1] - x[1];
                    costs[row * n + j] = dx * dx + dy * dy;
                }
            }
            let perm = lap::solve(&costs, n);
            for (row, sum) in s.iter_mut().enumerate() {
                let old = cloud[full[q][row]];
                let new = cloud[perm[row]];
                sum[0] += new[0] - old[0];
                sum[1] += new[1] - old[1];
            }
            full[q] = perm;
        }
        // Relabel rows so the first cloud keeps the identity ordering.
        let first = &full[0];
        for (dst, src) in genome.iter_mut().zip(&full[1..]) {
            for (row, &r) in first.iter().enumerate() {
                dst[r] = src[row];
            }
        }
    }
}

fn stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 20) ^ index as u64);
    rng
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// Order crossover: keep a slice of `a`, fill the rest in `b`'s order.
fn order_crossover(rng: &mut ChaCha8Rng, a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.to_vec();
    }
    let mut lo = rng.gen_range(0..n);
    let mut hi = rng.gen_range(0..n);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut child = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for i in lo..=hi {
        child[i] = a[i];
        taken[a[i]] = true;
    }
    let mut fill = b.iter().filter(|&&g| !taken[g]);
    for slot in child.iter_mut().filter(|c| **c == usize::MAX) {
        *slot = *fill.next().expect("enough remaining genes");
    }
    child
}

fn mutate(rng: &mut ChaCha8Rng, perm: &mut [usize], rate: f64) {
    let n = perm.len();
    if n < 2 || rate <= 0.0 {
        return;
    }
    for i in 0..n {
        if rng.gen::<f64>() < rate {
            let j = rng.gen_range(0..n);
            perm.swap(i, j);
        }
    }
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [(f64, Vec<Vec<usize>>)], k: usize) -> &'a Vec<Vec<usize>> {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..k {
        let c = rng.gen_range(0..pop.len());
        if pop[c].0 < pop[best].0 {
            best = c;
        }
    }
    &pop[best].1
}

/// Returns the best orderings found and the best-cost history.
pub(super) fn search(clouds: &[ParticleCloud], config: &MultiMatchConfig, seed: u64) -> (Vec<Vec<usize>>, Vec<f64>) {
    let problem = Problem::new(clouds);
    let n = problem.n;
    let p = problem.p();

    let chained = super::chained_pairwise(clouds).expect("validated ensemble");
    let chained_cost = problem.cost(&chained);
    let threshold = config.threshold(chained_cost);

    let mut polished = chained.clone();
    let mut polished_cost = chained_cost;
    for sweep in 0..config.refine_sweeps {
        let mut trial = polished.clone();
        problem.sweep(&mut trial);
        let c = problem.cost(&trial);
        let gain = polished_cost - c;
        if c < polished_cost {
            polished = trial;
            polished_cost = c;
        }
        log::debug!("matching sweep {sweep}: cost {polished_cost:.6e}");
        if gain < threshold {
            break;
        }
    }

    let mut pop: Vec<(f64, Vec<Vec<usize>>)> = Vec::with_capacity(config.population);
    pop.push((chained_cost, chained));
    pop.push((polished_cost, polished.clone()));
    let rate = config.mutation_swaps / n as f64;
    for i in pop.len()..config.population {
        let mut rng = stream(seed, 0, i);
        let genome: Vec<Vec<usize>> = if i % 2 == 0 {
            (1..p).map(|_| random_permutation(&mut rng, n)).collect()
        } else {
            let mut g = polished.clone();
            for perm in &mut g {
                mutate(&mut rng, perm, (4.0 * rate).min(1.0));
            }
            g
        };
        pop.push((problem.cost(&genome), genome));
    }
    pop.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut history = vec![pop[0].0];

    for generation in 1..=config.max_generations {
        let mut next: Vec<(f64, Vec<Vec<usize>>)> = pop[..config.elitism].to_vec();
        for i in config.elitism..config.population {
            let mut rng = stream(seed, generation, i);
            let a = tournament(&mut rng, &pop, config.tournament);
            let b = tournament(&mut rng, &pop, config.tournament);
            let mut child: Vec<Vec<usize>> = if rng.gen::<f64>() < config.crossover_rate {
                a.iter().zip(b).map(|(x, y)| order_crossover(&mut rng, x, y)).collect()
            } else {
                a.clone()
            };
            for perm in &mut child {
                mutate(&mut rng, perm, rate);
            }
            next.push((problem.cost(&child), child));
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        pop = next;
        history.push(pop[0].0);
        if generation >= config.stall_generations {
            let before = history[generation - config.stall_generations];
            if before - pop[0].0 < threshold {
                break;
            }
        }
    }
    let best = pop.swap_remove(0).1;
    (best, history)
}
