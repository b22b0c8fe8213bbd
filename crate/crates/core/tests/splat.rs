use std::f64::consts::PI;

use ots_core::matching::match_pair;
use ots_core::splat::{importance_init, leaked_mass, SplatObjective};
use ots_core::{decompose, evaluate_cloud, normalize_field, split_signed, DecomposeOptions, FieldSample, Grid, ParticleCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_grid(n: usize) -> Grid {
    Grid::over_box([0.0, 0.0], [1.0, 1.0], n, n).unwrap()
}

/// Direct double loop over nodes and particles.
fn oracle_reconstruction(centers: &[[f64; 2]], sigma: f64, grid: &Grid) -> Vec<f64> {
    let w = 1.0 / (centers.len() as f64 * 2.0 * PI * sigma * sigma);
    (0..grid.len())
        .map(|k| {
            let x = grid.position(k);
            centers
                .iter()
                .map(|c| w * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * sigma * sigma)).exp())
                .sum()
        })
        .collect()
}

fn oracle_objective(centers: &[[f64; 2]], sigma: f64, target: &FieldSample, fit_amplitude: bool) -> f64 {
    let r = oracle_reconstruction(centers, sigma, &target.grid);
    let m = &target.grid.mask;
    let amp = if fit_amplitude {
        let tr: f64 = (0..r.len()).filter(|&k| m[k]).map(|k| r[k] * target.values[k]).sum();
        let rr: f64 = (0..r.len()).filter(|&k| m[k]).map(|k| r[k] * r[k]).sum();
        tr / rr
    } else {
        1.0
    };
    0.5 * (0..r.len()).filter(|&k| m[k]).map(|k| (amp * r[k] - target.values[k]).powi(2)).sum::<f64>()
}

fn random_target(rng: &mut ChaCha8Rng, grid: &Grid) -> FieldSample {
    let bumps: Vec<([f64; 2], f64)> =
        (0..3).map(|_| ([rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)], rng.gen_range(0.08..0.2))).collect();
    let values = (0..grid.len())
        .map(|k| {
            let x = grid.position(k);
            0.05 + bumps.iter().map(|(c, s)| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * s * s)).exp()).sum::<f64>()
        })
        .collect();
    normalize_field(&FieldSample::new(grid.clone(), values).unwrap()).unwrap()
}

fn random_centers(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)]).collect()
}

#[test]
fn objective_matches_direct_summation() {
    let grid = unit_grid(24);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fit in [false, true] {
        let target = random_target(&mut rng, &grid);
        let centers = random_centers(&mut rng, 7);
        let obj = SplatObjective::new(&target, 7, 0.09, None).unwrap().with_amplitude(fit);
        let want = oracle_objective(&centers, 0.09, &target, fit);
        assert!((obj.value(&centers) - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn gradient_agrees_with_central_differences() {
    let grid = unit_grid(20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for instance in 0..20 {
        let n = rng.gen_range(1..=20);
        let sigma = rng.gen_range(0.05..0.15);
        let fit = instance % 2 == 1;
        let target = random_target(&mut rng, &grid);
        let centers = random_centers(&mut rng, n);
        let obj = SplatObjective::new(&target, n, sigma, None).unwrap().with_amplitude(fit);
        let mut grad = Vec::new();
        obj.value_and_gradient(&centers, &mut grad);
        let h = 1e-6;
        let mut num = vec![[0.0; 2]; n];
        for i in 0..n {
            for d in 0..2 {
                let mut p = centers.clone();
                p[i][d] += h;
                let fp = oracle_objective(&p, sigma, &target, fit);
                p[i][d] -= 2.0 * h;
                let fm = oracle_objective(&p, sigma, &target, fit);
                num[i][d] = (fp - fm) / (2.0 * h);
            }
        }
        let diff: f64 = grad.iter().zip(&num).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = num.iter().map(|b| b[0] * b[0] + b[1] * b[1]).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-5, "instance {instance}: relative gradient error {}", diff / norm);
    }
}

#[test]
fn recovers_a_five_particle_cloud_from_a_nearby_start() {
    let grid = unit_grid(64);
    let truth = ParticleCloud::new(vec![[0.3, 0.3], [0.7, 0.35], [0.5, 0.7], [0.25, 0.65], [0.72, 0.72]], 0.06).unwrap();
    let target = normalize_field(&evaluate_cloud(&truth, &grid)).unwrap();
    let opts = DecomposeOptions { tolerance: 1e-12, cutoff_sigmas: None, ..DecomposeOptions::default() };
    let start: Vec<[f64; 2]> = truth.centers.iter().enumerate().map(|(i, c)| [c[0] + 0.03 * (i as f64 - 2.0) / 2.0, c[1] - 0.02]).collect();
    let start = ParticleCloud::new(start, 0.06).unwrap();
    let d = decompose(&target, 5, 0.06, Some(&start), &opts).unwrap();
    let m = match_pair(&truth, &d.cloud).unwrap();
    let worst = (0..5)
        .map(|i| {
            let a = truth.centers[i];
            let b = d.cloud.centers[m.permutation[i]];
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.5 * grid.spacing[0], "worst center error {worst}");
}

#[test]
fn objective_history_never_increases() {
    let grid = unit_grid(40);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = random_target(&mut rng, &grid);
    for fit in [false, true] {
        let opts = DecomposeOptions { fit_amplitude: fit, ..DecomposeOptions::default() };
        let d = decompose(&target, 40, 0.05, None, &opts).unwrap();
        assert!(d.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(d.history.len(), d.iterations + 1);
        assert!((d.cloud.total_mass() - 1.0).abs() <= 1e-12);
        assert!(d.amplitude > 0.0);
    }
}

#[test]
fn decomposition_is_seed_deterministic() {
    let grid = unit_grid(32);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let target = random_target(&mut rng, &grid);
    let opts = DecomposeOptions { seed: 99, ..DecomposeOptions::default() };
    let a = decompose(&target, 30, 0.06, None, &opts).unwrap();
    let b = decompose(&target, 30, 0.06, None, &opts).unwrap();
    assert_eq!(a.cloud, b.cloud);
    assert_eq!(a.history, b.history);
}

#[test]
fn rejects_bad_inputs() {
    let grid = unit_grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let target = random_target(&mut rng, &grid);
    assert!(decompose(&target, 5, 0.0, None, &DecomposeOptions::default()).is_err());
    let raw = FieldSample::new(grid.clone(), vec![2.0; grid.len()]).unwrap();
    assert!(decompose(&raw, 5, 0.1, None, &DecomposeOptions::default()).is_err());
    let mut neg = raw.clone();
    neg.values[3] = -1.0;
    assert!(normalize_field(&neg).is_err());
    let wrong = ParticleCloud::new(vec![[0.5, 0.5]; 3], 0.1).unwrap();
    assert!(decompose(&target, 5, 0.1, Some(&wrong), &DecomposeOptions::default()).is_err());
}

#[test]
fn split_signed_reconstructs_linear_ramp() {
    let grid = unit_grid(17);
    let values: Vec<f64> = (0..grid.len()).map(|k| grid.position(k)[0] - 0.5).collect();
    let field = FieldSample::new(grid, values.clone()).unwrap();
    let (pos, neg) = split_signed(&field).unwrap();
    for k in 0..values.len() {
        assert_eq!(pos.values[k] - neg.values[k], values[k]);
        assert!(pos.values[k] >= 0.0 && neg.values[k] >= 0.0);
        assert!(pos.values[k] == 0.0 || neg.values[k] == 0.0);
    }
}

#[test]
fn importance_init_lands_in_support() {
    let grid = unit_grid(30);
    let mut values = vec![0.0; grid.len()];
    for j in 10..20 {
        for i in 5..12 {
            values[grid.index(i, j)] = 1.0;
        }
    }
    let target = normalize_field(&FieldSample::new(grid.clone(), values).unwrap()).unwrap();
    let cloud = importance_init(&target, 200, 0.05, 4).unwrap();
    let h = grid.spacing[0];
    for c in &cloud.centers {
        assert!(c[0] >= 5.0 * h - h && c[0] <= 11.0 * h + h, "x {}", c[0]);
        assert!(c[1] >= 10.0 * h - h && c[1] <= 19.0 * h + h, "y {}", c[1]);
    }
}

#[test]
fn box_mass_matches_error_function() {
    let cloud = ParticleCloud::new(vec![[0.0, 0.0]], 0.5).unwrap();
    let inside = libm::erf(1.0 / (0.5 * 2f64.sqrt())).powi(2);
    assert!((cloud.mass_in_box([-1.0, -1.0], [1.0, 1.0]) - inside).abs() < 1e-14);
    // cells of this lattice tile exactly [-1, 1]^2
    let h = 2.0 / 400.0;
    let grid = Grid::over_box([-1.0 + 0.5 * h, -1.0 + 0.5 * h], [1.0 - 0.5 * h, 1.0 - 0.5 * h], 400, 400).unwrap();
    assert!((leaked_mass(&cloud, &grid) - (1.0 - inside)).abs() < 1e-12);
    let quadrature = evaluate_cloud(&cloud, &grid).quadrature();
    assert!((quadrature - inside).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_is_positive_with_unit_mass(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..25),
        sigma in 0.02f64..0.3,
    ) {
        let cloud = ParticleCloud::new(pts.iter().map(|&(x, y)| [x, y]).collect(), sigma).unwrap();
        prop_assert!((cloud.total_mass() - 1.0).abs() <= 1e-12);
        let field = evaluate_cloud(&cloud, &unit_grid(12));
        prop_assert!(field.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn objective_is_permutation_invariant(seed in 0u64..1000, n in 2usize..12) {
        let grid = unit_grid(14);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = random_target(&mut rng, &grid);
        let centers = random_centers(&mut rng, n);
        let mut shuffled = centers.clone();
        shuffled.reverse();
        shuffled.rotate_left(seed as usize % n);
        let obj = SplatObjective::new(&target, n, 0.1, None).unwrap();
        let (a, b) = (obj.value(&centers), obj.value(&shuffled));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}
