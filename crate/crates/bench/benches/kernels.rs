use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ots_core::geometry::{levelset_from_cloud, random_star_domain, StarConfig};
use ots_core::heat::{solve, HeatProblem, HeatSettings};
use ots_core::matching::match_pair;
use ots_core::splat::{evaluate_cloud_truncated, SplatObjective};
use ots_core::{normalize_field, FieldSample, Grid, ParticleCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> ParticleCloud {
    ParticleCloud::new((0..n).map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]).collect(), sigma).unwrap()
}

fn grid(n: usize) -> Grid {
    Grid::over_box([-0.6, -0.6], [0.6, 0.6], n, n).unwrap()
}

fn splat_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = grid(128);
    let values: Vec<f64> = (0..g.len())
        .map(|k| {
            let p = g.position(k);
            (-(p[0] * p[0] + p[1] * p[1]) / 0.05).exp()
        })
        .collect();
    let target = normalize_field(&FieldSample::new(g, values).unwrap()).unwrap();
    let mut group = c.benchmark_group("splat_value_and_gradient");
    for n in [150, 600] {
        let centers = cloud(&mut rng, n, 0.03).centers;
        let obj = SplatObjective::new(&target, n, 0.03, Some(8.0)).unwrap().with_amplitude(true);
        let mut grad = Vec::new();
        group.bench_with_input(BenchmarkId::from_parameter(n), &centers, |b, x| {
            b.iter(|| obj.value_and_gradient(black_box(x), &mut grad))
        });
    }
    group.finish();
}

fn pair_matching(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("match_pair");
    group.sample_size(10);
    for n in [100, 300, 600] {
        let (a, b) = (cloud(&mut rng, n, 0.03), cloud(&mut rng, n, 0.03));
        group.bench_with_input(BenchmarkId::from_parameter(n), &(a, b), |bench, (a, b)| {
            bench.iter(|| match_pair(black_box(a), black_box(b)).unwrap())
        });
    }
    group.finish();
}

fn field_evaluation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = grid(128);
    let cl = cloud(&mut rng, 600, 0.03);
    c.bench_function("evaluate_cloud_truncated_600_128x128", |b| {
        b.iter(|| evaluate_cloud_truncated(black_box(&cl), &g, 9.0))
    });
    let geo = cloud(&mut rng, 600, 0.02);
    c.bench_function("levelset_from_cloud_600_128x128", |b| b.iter(|| levelset_from_cloud(black_box(&geo), &g)));
}

fn heat_solve(c: &mut Criterion) {
    let g = grid(128);
    let domain = random_star_domain(4, &StarConfig::default(), &g, 50.0).unwrap();
    let problem = HeatProblem::new(&domain, HeatSettings::default(), 0.6, 0.2).unwrap();
    let mut group = c.benchmark_group("heat");
    group.sample_size(10);
    group.bench_function("solve_128x128_50_steps", |b| b.iter(|| solve(black_box(&problem)).unwrap()));
    group.finish();
}

criterion_group!(benches, splat_gradient, pair_matching, field_evaluation, heat_solve);
criterion_main!(benches);
