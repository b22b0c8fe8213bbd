use std::f64::consts::PI;

use ots_core::geometry::{
    barycenter_of, contour_polygon, levelset_from_cloud, membership, random_star_polygon, reference_box, reparameterize,
    sdf_from_polygon, sigmoid_levelset, BarycentricWeights, GeometryDomain, Polygon, StarConfig,
};
use ots_core::matching::match_multi;
use ots_core::{DecomposeOptions, Grid, ParticleCloud, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force distance to a densely sampled boundary.
fn sampled_distance(samples: &[Point], p: Point) -> f64 {
    samples.iter().map(|s| ((s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2)).sqrt()).fold(f64::INFINITY, f64::min)
}

fn boundary_samples(poly: &Polygon, total: usize) -> Vec<Point> {
    let per = total / poly.len();
    poly.edges()
        .flat_map(|(a, b)| (0..per).map(move |t| {
            let s = t as f64 / per as f64;
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        }))
        .collect()
}

fn ray_cast_inside(poly: &Polygon, p: Point) -> bool {
    let v = poly.vertices();
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[test]
fn sdf_matches_sampled_boundary_oracle() {
    let poly = random_star_polygon(17, &StarConfig { vertices: 64, ..StarConfig::default() }).unwrap();
    let grid = Grid::over_box([-0.9, -0.9], [0.9, 0.9], 41, 41).unwrap();
    let sdf = sdf_from_polygon(&poly, &grid);
    let samples = boundary_samples(&poly, 100_000);
    let spacing = poly.edges().map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()).fold(0.0, f64::max)
        / (100_000 / poly.len()) as f64;
    for k in 0..grid.len() {
        let p = grid.position(k);
        let d = sampled_distance(&samples, p);
        let want = if ray_cast_inside(&poly, p) { d } else { -d };
        assert!((sdf.values[k] - want).abs() <= spacing, "node {k}: {} vs {want}", sdf.values[k]);
    }
}

#[test]
fn sdf_is_one_lipschitz_on_the_grid() {
    let poly = random_star_polygon(3, &StarConfig::default()).unwrap();
    let grid = Grid::over_box([-0.9, -0.9], [0.9, 0.9], 60, 60).unwrap();
    let sdf = sdf_from_polygon(&poly, &grid);
    let h = grid.spacing[0];
    for j in 0..grid.ny {
        for i in 0..grid.nx - 1 {
            let d = (sdf.values[grid.index(i + 1, j)] - sdf.values[grid.index(i, j)]).abs();
            assert!(d <= h * (1.0 + 1e-12));
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            let d = (sdf.values[grid.index(i, j + 1)] - sdf.values[grid.index(i, j)]).abs();
            assert!(d <= h * (1.0 + 1e-12));
        }
    }
}

#[test]
fn regular_polygon_center_distance_within_sagitta() {
    let (r, n) = (0.4, 256);
    let poly = Polygon::regular([0.0, 0.0], r, n).unwrap();
    let d = poly.signed_distance([0.0, 0.0]);
    let sagitta = r * (1.0 - (PI / n as f64).cos());
    assert!(d <= r && d >= r - sagitta - 1e-15);
    assert!((poly.area() - 0.5 * n as f64 * r * r * (2.0 * PI / n as f64).sin()).abs() < 1e-12);
}

#[test]
fn star_domains_are_simple_and_bounded_below() {
    let cfg = StarConfig::default();
    for seed in 0..1000 {
        let poly = random_star_polygon(seed, &cfg).unwrap();
        assert_eq!(poly.len(), 256);
        assert!(poly.find_self_intersection().is_none(), "seed {seed}");
        let rmin = poly.vertices().iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).fold(f64::INFINITY, f64::min);
        assert!(rmin > 0.3 * cfg.base_radius, "seed {seed}: min radius {rmin}");
    }
    assert_eq!(random_star_polygon(5, &cfg).unwrap(), random_star_polygon(5, &cfg).unwrap());
}

#[test]
fn zero_harmonics_give_a_regular_polygon() {
    let cfg = StarConfig { harmonics: 0, ..StarConfig::default() };
    let poly = random_star_polygon(1, &cfg).unwrap();
    for v in poly.vertices() {
        assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn self_intersecting_polygon_is_rejected() {
    assert!(Polygon::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 1.0]]).is_err());
    assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
}

#[test]
fn reference_box_is_square_with_margin() {
    let a = Polygon::regular([0.0, 0.0], 0.5, 32).unwrap();
    let b = Polygon::regular([0.3, 0.1], 0.2, 32).unwrap();
    let (lo, hi) = reference_box(&[a.clone(), b], 0.2).unwrap();
    let side = hi[0] - lo[0];
    assert!((side - (hi[1] - lo[1])).abs() < 1e-12);
    let (alo, ahi) = a.bounds();
    assert!((side - 1.2 * (ahi[0] - alo[0])).abs() < 1e-12);
}

#[test]
fn circle_reparameterization_recovers_shape() {
    let r = 0.45;
    let poly = Polygon::regular([0.0, 0.0], r, 256).unwrap();
    let grid = Grid::over_box([-0.7, -0.7], [0.7, 0.7], 96, 96).unwrap();
    let dom = GeometryDomain::new(poly.clone(), &grid, 50.0).unwrap();
    let d = reparameterize(&dom, 400, 0.03, &DecomposeOptions::default()).unwrap();
    let ls = levelset_from_cloud(&d.cloud, &grid);
    assert!((ls.values.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
    let contour = contour_polygon(&ls, 0.5).unwrap();
    let hausdorff = contour
        .vertices()
        .iter()
        .map(|v| ((v[0] * v[0] + v[1] * v[1]).sqrt() - r).abs())
        .fold(0.0, f64::max);
    assert!(hausdorff < 3.0 * grid.spacing[0], "hausdorff {hausdorff}");
    assert!((contour.area() - poly.area()).abs() / poly.area() < 0.05);

    let mut agree = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 2000;
    for _ in 0..trials {
        let p = [rng.gen_range(-0.69..0.69), rng.gen_range(-0.69..0.69)];
        agree += (membership(&ls, p).unwrap() == poly.contains(p)) as usize;
    }
    assert!(agree as f64 / trials as f64 >= 0.98);
    assert!(membership(&ls, [2.0, 0.0]).is_err());
}

#[test]
fn sigmoid_levelset_has_half_value_on_boundary() {
    let poly = Polygon::regular([0.0, 0.0], 0.3, 128).unwrap();
    let grid = Grid::over_box([-0.5, -0.5], [0.5, 0.5], 21, 21).unwrap();
    let sdf = sdf_from_polygon(&poly, &grid);
    let ls = sigmoid_levelset(&sdf);
    for (s, l) in sdf.values.iter().zip(&ls.values) {
        assert!((l - 1.0 / (1.0 + (-s).exp())).abs() < 1e-15);
    }
}

#[test]
fn weights_validation() {
    assert!(BarycentricWeights::new(vec![0.3, 0.3, 0.3]).is_err());
    assert!(BarycentricWeights::new(vec![1.2, -0.2]).is_err());
    assert!(BarycentricWeights::new(vec![]).is_err());
    assert_eq!(BarycentricWeights::one_hot(3, 1).unwrap().one_hot_index(), Some(1));
    assert_eq!(BarycentricWeights::uniform(4).unwrap().one_hot_index(), None);
}

fn three_clouds(seed: u64) -> Vec<ParticleCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3)
        .map(|_| ParticleCloud::new((0..10).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect(), 0.05).unwrap())
        .collect()
}

#[test]
fn barycenter_endpoints_and_matched_ensemble() {
    let clouds = three_clouds(1);
    let ens = match_multi(&clouds, &Default::default(), 0).unwrap();
    let refs: Vec<&ParticleCloud> = ens.clouds.iter().collect();
    for k in 0..3 {
        let b = barycenter_of(&refs, &BarycentricWeights::one_hot(3, k).unwrap()).unwrap();
        assert_eq!(b, ens.clouds[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barycenter_is_linear_and_convex(seed in 0u64..1000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let clouds = three_clouds(seed);
        let refs: Vec<&ParticleCloud> = clouds.iter().collect();
        let (a, b) = (a.min(1.0 - 1e-9), b.min(1.0 - a));
        let w = vec![a, b, 1.0 - a - b];
        let bc = barycenter_of(&refs, &BarycentricWeights::new(w.clone()).unwrap()).unwrap();
        for n in 0..10 {
            for d in 0..2 {
                let want: f64 = (0..3).map(|k| w[k] * clouds[k].centers[n][d]).sum();
                prop_assert!((bc.centers[n][d] - want).abs() < 1e-14);
                let lo = clouds.iter().map(|c| c.centers[n][d]).fold(f64::INFINITY, f64::min);
                let hi = clouds.iter().map(|c| c.centers[n][d]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(bc.centers[n][d] >= lo - 1e-14 && bc.centers[n][d] <= hi + 1e-14);
            }
        }
    }

    #[test]
    fn winding_membership_agrees_with_ray_casting(seed in 0u64..500, x in -0.8f64..0.8, y in -0.8f64..0.8) {
        let poly = random_star_polygon(seed, &StarConfig { vertices: 48, ..StarConfig::default() }).unwrap();
        prop_assume!(poly.boundary_distance([x, y]) > 1e-9);
        prop_assert_eq!(poly.contains([x, y]), ray_cast_inside(&poly, [x, y]));
        let sd = poly.signed_distance([x, y]);
        prop_assert_eq!(sd > 0.0, poly.contains([x, y]));
    }
}
