//! Domain reparameterization and barycentric shape interpolation.
//!
//! A polygonal domain becomes a signed distance field on the reference box,
//! then a sigmoid level-set whose 0.5 iso-contour is the boundary. The
//! normalized level-set is splatted into a particle cloud; matched clouds of
//! several domains are averaged row-wise to interpolate new domains.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldSample, Grid, Point};
use crate::matching::MatchedEnsemble;
use crate::splat::{self, DecomposeOptions, Decomposition, ParticleCloud};

/// Closed simple polygon with counter-clockwise vertex order. The closing
/// edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Whether closed segments `ab` and `cd` share a point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

impl Polygon {
    /// Validates and orients a vertex list. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        let (lo, hi) = bounds(&vertices);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        if area.abs() <= 1e-12 * extent * extent || extent == 0.0 {
            return Err(Error::DegeneratePolygon(format!("near-zero area {area}")));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let poly = Self { vertices };
        if let Some((i, j)) = poly.find_self_intersection() {
            return Err(Error::SelfIntersectingPolygon(i, j));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// First pair of non-adjacent edges that touch, if any.
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let v = &self.vertices;
        let boxes: Vec<(Point, Point)> = (0..n).map(|i| bounds(&[v[i], v[(i + 1) % n]])).collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a_lo, a_hi) = boxes[i];
                let (b_lo, b_hi) = boxes[j];
                if a_hi[0] < b_lo[0] || b_hi[0] < a_lo[0] || a_hi[1] < b_lo[1] || b_hi[1] < a_lo[1] {
                    continue;
                }
                if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return Some((i, j));
                }
            }
        }
        // Adjacent edges may still fold back onto each other.
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let c = v[(i + 2) % n];
            if cross(a, b, c) == 0.0 && (c[0] - b[0]) * (a[0] - b[0]) + (c[1] - b[1]) * (a[1] - b[1]) > 0.0 {
                return Some((i, (i + 1) % n));
            }
        }
        None
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        let a6 = 6.0 * self.area();
        [cx / a6, cy / a6]
    }

    pub fn bounds(&self) -> (Point, Point) {
        bounds(&self.vertices)
    }

    /// Winding number of the boundary around `p`.
    pub fn winding_number(&self, p: Point) -> i32 {
        let mut wn = 0;
        for (a, b) in self.edges() {
            if a[1] <= p[1] {
                if b[1] > p[1] && cross(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= p[1] && cross(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    pub fn contains(&self, p: Point) -> bool {
        self.winding_number(p) != 0
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Signed distance, positive inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    /// Closest boundary hit of the ray from `origin` at polar angle `angle`.
    pub fn ray_hit(&self, origin: Point, angle: f64) -> Result<Point> {
        let dir = [angle.cos(), angle.sin()];
        let mut best = f64::INFINITY;
        for (a, b) in self.edges() {
            let e = [b[0] - a[0], b[1] - a[1]];
            let denom = dir[0] * e[1] - dir[1] * e[0];
            if denom.abs() < 1e-300 {
                continue;
            }
            let w = [a[0] - origin[0], a[1] - origin[1]];
            let t = (w[0] * e[1] - w[1] * e[0]) / denom;
            let s = (w[0] * dir[1] - w[1] * dir[0]) / denom;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) && t < best {
                best = t;
            }
        }
        if best.is_finite() {
            Ok([origin[0] + best * dir[0], origin[1] + best * dir[1]])
        } else {
            Err(Error::RayMiss(angle))
        }
    }

    /// Fraction in `(0, 1]` along `a -> b` where the segment first leaves the
    /// polygon, assuming `a` is inside; `None` if it never crosses.
    pub fn segment_exit(&self, a: Point, b: Point) -> Option<f64> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let mut best: Option<f64> = None;
        for (p, q) in self.edges() {
            let e = [q[0] - p[0], q[1] - p[1]];
            let denom = d[0] * e[1] - d[1] * e[0];
            if denom.abs() < 1e-300 {
                continue;
            }
            let w = [p[0] - a[0], p[1] - a[1]];
            let t = (w[0] * e[1] - w[1] * e[0]) / denom;
            let s = (w[0] * d[1] - w[1] * d[0]) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }

    pub fn translated(&self, by: Point) -> Self {
        Self { vertices: self.vertices.iter().map(|v| [v[0] + by[0], v[1] + by[1]]).collect() }
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` around `center`.
    pub fn regular(center: Point, r: f64, n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    [center[0] + r * a.cos(), center[1] + r * a.sin()]
                })
                .collect(),
        )
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

fn bounds(v: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Square box enclosing all polygons, grown by `margin` (a fraction of the
/// largest extent) split evenly between the two sides.
pub fn reference_box(polygons: &[Polygon], margin: f64) -> Result<(Point, Point)> {
    if polygons.is_empty() {
        return Err(Error::InvalidParameter("reference box needs at least one polygon".into()));
    }
    let all: Vec<Point> = polygons.iter().flat_map(|p| p.vertices.iter().copied()).collect();
    let (lo, hi) = bounds(&all);
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let half = 0.5 * extent * (1.0 + margin);
    let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    Ok(([c[0] - half, c[1] - half], [c[0] + half, c[1] + half]))
}

/// Signed distance to the polygon boundary at every node of `grid`.
pub fn sdf_from_polygon(poly: &Polygon, grid: &Grid) -> FieldSample {
    let values = (0..grid.len()).map(|k| poly.signed_distance(grid.position(k))).collect();
    FieldSample { grid: grid.unmasked(), values, integral: None }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Node-wise `1 / (1 + exp(-sdf))`.
pub fn sigmoid_levelset(sdf: &FieldSample) -> FieldSample {
    sigmoid_levelset_with(sdf, 1.0)
}

/// Node-wise `1 / (1 + exp(-steepness * sdf))`.
pub fn sigmoid_levelset_with(sdf: &FieldSample, steepness: f64) -> FieldSample {
    FieldSample {
        grid: sdf.grid.clone(),
        values: sdf.values.iter().map(|&d| sigmoid(steepness * d)).collect(),
        integral: None,
    }
}

/// A domain together with its distance and level-set rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryDomain {
    pub boundary: Polygon,
    pub sdf: FieldSample,
    pub levelset: FieldSample,
    pub area: f64,
}

impl GeometryDomain {
    pub fn new(boundary: Polygon, grid: &Grid, steepness: f64) -> Result<Self> {
        if !(steepness > 0.0 && steepness.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigmoid steepness must be positive, got {steepness}")));
        }
        let sdf = sdf_from_polygon(&boundary, grid);
        let levelset = sigmoid_levelset_with(&sdf, steepness);
        let area = boundary.area();
        Ok(Self { boundary, sdf, levelset, area })
    }

    /// Nodes strictly inside the polygon.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.sdf.values.iter().map(|&d| d > 0.0).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.sdf.grid
    }
}

/// Normalizes the level-set over the whole reference box and splats it.
pub fn reparameterize(
    dom: &GeometryDomain,
    n_particles: usize,
    sigma: f64,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let target = splat::normalize_field(&FieldSample {
        grid: dom.levelset.grid.unmasked(),
        values: dom.levelset.values.clone(),
        integral: None,
    })?;
    splat::decompose(&target, n_particles, sigma, None, opts)
}

/// Convex weights over `K` sampled geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricWeights(Vec<f64>);

impl BarycentricWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadWeights("at least one weight is required".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::BadWeights(format!("weights must be non-negative, got {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self(weights))
    }

    /// Weight vector selecting geometry `k` out of `len`.
    pub fn one_hot(len: usize, k: usize) -> Result<Self> {
        if k >= len {
            return Err(Error::BadWeights(format!("index {k} out of range for {len} geometries")));
        }
        let mut w = vec![0.0; len];
        w[k] = 1.0;
        Self::new(w)
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::BadWeights("at least one weight is required".into()));
        }
        let mut w = vec![1.0 / len as f64; len];
        // absorb rounding so the sum is exactly representable as 1
        let rest: f64 = w[1..].iter().sum();
        w[0] = 1.0 - rest;
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the single non-zero weight, if the vector is one-hot.
    pub fn one_hot_index(&self) -> Option<usize> {
        let mut nz = self.0.iter().enumerate().filter(|(_, &w)| w != 0.0);
        match (nz.next(), nz.next()) {
            (Some((k, &w)), None) if w == 1.0 => Some(k),
            _ => None,
        }
    }
}

/// Row-wise weighted average of matched clouds.
pub fn barycenter_of(clouds: &[&ParticleCloud], w: &BarycentricWeights) -> Result<ParticleCloud> {
    if clouds.len() != w.len() {
        return Err(Error::SizeMismatch(format!("{} clouds but {} weights", clouds.len(), w.len())));
    }
    let n = clouds[0].n_particles();
    if clouds.iter().any(|c| c.n_particles() != n) {
        return Err(Error::SizeMismatch("clouds differ in particle count".into()));
    }
    if let Some(k) = w.one_hot_index() {
        return Ok(clouds[k].clone());
    }
    let mut centers = vec![[0.0; 2]; n];
    for (c, &wk) in clouds.iter().zip(w.as_slice()) {
        if wk == 0.0 {
            continue;
        }
        for (acc, x) in centers.iter_mut().zip(&c.centers) {
            acc[0] += wk * x[0];
            acc[1] += wk * x[1];
        }
    }
    ParticleCloud::new(centers, clouds[0].sigma)
}

/// Wasserstein barycenter of a matched ensemble of geometry clouds.
pub fn barycenter(ensemble: &MatchedEnsemble, w: &BarycentricWeights) -> Result<ParticleCloud> {
    let refs: Vec<&ParticleCloud> = ensemble.clouds.iter().collect();
    barycenter_of(&refs, w)
}

/// Reconstructed level-set rescaled by its maximum over the grid nodes.
pub fn levelset_from_cloud(cloud: &ParticleCloud, grid: &Grid) -> FieldSample {
    let mut f = splat::evaluate_cloud_truncated(cloud, &grid.unmasked(), 9.0);
    let max = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        for v in &mut f.values {
            *v /= max;
        }
    }
    f
}

/// Whether `x` lies in `{levelset >= 0.5}` under bilinear interpolation.
pub fn membership(levelset: &FieldSample, x: Point) -> Result<bool> {
    levelset.at(x).map(|v| v >= 0.5).ok_or(Error::OutOfBox(x[0], x[1]))
}

/// Nodes whose level-set value is at least 0.5.
pub fn levelset_mask(levelset: &FieldSample) -> Vec<bool> {
    levelset.values.iter().map(|&v| v >= 0.5).collect()
}

/// Settings for random star-shaped domains
/// `r(a) = r0 (1 + sum_j c_j cos(j a + phase_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarConfig {
    pub center: Point,
    pub base_radius: f64,
    pub harmonics: usize,
    /// Upper bound for each harmonic amplitude `c_j` (before the `1/j` decay).
    pub max_amplitude: f64,
    pub vertices: usize,
}

impl Default for StarConfig {
    fn default() -> Self {
        Self { center: [0.0, 0.0], base_radius: 0.5, harmonics: 4, max_amplitude: 0.25, vertices: 256 }
    }
}

/// Seeded random star-shaped polygon. The perturbation is scaled down when
/// needed so the radius never drops below `0.3 * base_radius`.
pub fn random_star_polygon(seed: u64, config: &StarConfig) -> Result<Polygon> {
    if !(config.base_radius > 0.0) || config.vertices < 3 || config.max_amplitude < 0.0 {
        return Err(Error::Config("star domain needs base_radius > 0, vertices >= 3, max_amplitude >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=config.harmonics)
        .map(|j| (rng.gen::<f64>() * config.max_amplitude / j as f64, rng.gen::<f64>() * 2.0 * PI))
        .collect();
    let angles: Vec<f64> = (0..config.vertices).map(|k| 2.0 * PI * k as f64 / config.vertices as f64).collect();
    let perturb: Vec<f64> = angles
        .iter()
        .map(|&a| coeffs.iter().enumerate().map(|(j, (c, ph))| c * ((j + 1) as f64 * a + ph).cos()).sum())
        .collect();
    let min = perturb.iter().copied().fold(f64::INFINITY, f64::min);
    // keep 1 + scale * min >= 0.35 (strictly above the 0.3 floor)
    let scale = if 1.0 + min < 0.35 { 0.65 / -min } else { 1.0 };
    let r0 = config.base_radius;
    Polygon::new(
        angles
            .iter()
            .zip(&perturb)
            .map(|(&a, &p)| {
                let r = r0 * (1.0 + scale * p);
                [config.center[0] + r * a.cos(), config.center[1] + r * a.sin()]
            })
            .collect(),
    )
}

pub fn random_star_domain(seed: u64, config: &StarConfig, grid: &Grid, steepness: f64) -> Result<GeometryDomain> {
    GeometryDomain::new(random_star_polygon(seed, config)?, grid, steepness)
}

/// Iso-contours of `field` at `level` by marching squares. Returns closed
/// loops and open polylines (those touching the box edge).
pub fn contours(field: &FieldSample, level: f64) -> Vec<Vec<Point>> {
    let g = &field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let v = |i: usize, j: usize| field.values[j * nx + i] - level;
    // edge ids: horizontal (i,j)-(i+1,j) -> 2*(j*nx+i); vertical (i,j)-(i,j+1) -> 2*(j*nx+i)+1
    let h_edge = |i: usize, j: usize| 2 * (j * nx + i);
    let v_edge = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let point_on = |e: usize| -> Point {
        let k = e / 2;
        let (i, j) = (k % nx, k / nx);
        let a = g.node(i, j);
        let (fa, b, fb) = if e % 2 == 0 {
            (v(i, j), g.node(i + 1, j), v(i + 1, j))
        } else {
            (v(i, j), g.node(i, j + 1), v(i, j + 1))
        };
        let t = if fa == fb { 0.5 } else { (fa / (fa - fb)).clamp(0.0, 1.0) };
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };

    let mut links: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    let mut add = |a: usize, b: usize| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            let code = c.iter().enumerate().fold(0u8, |acc, (b, &x)| acc | (((x >= 0.0) as u8) << b));
            let bottom = h_edge(i, j);
            let right = v_edge(i + 1, j);
            let top = h_edge(i, j + 1);
            let left = v_edge(i, j);
            match code {
                0 | 15 => {}
                1 | 14 => add(left, bottom),
                2 | 13 => add(bottom, right),
                3 | 12 => add(left, right),
                4 | 11 => add(right, top),
                6 | 9 => add(bottom, top),
                7 | 8 => add(left, top),
                5 | 10 => {
                    let center = 0.25 * c.iter().sum::<f64>();
                    let center_in = center >= 0.0;
                    // code 5: corners 0 and 2 inside
                    if (code == 5) == center_in {
                        add(left, top);
                        add(bottom, right);
                    } else {
                        add(left, bottom);
                        add(right, top);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut keys: Vec<usize> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut used: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut out = Vec::new();
    let edge_key = |a: usize, b: usize| (a.min(b), a.max(b));
    // open chains first (endpoints have a single link), then loops
    let starts: Vec<usize> = keys.iter().copied().filter(|k| links[k].len() == 1).chain(keys.iter().copied()).collect();
    for start in starts {
        let Some(&first) = links[&start].iter().find(|&&n| !used.contains(&edge_key(start, n))) else {
            continue;
        };
        let mut chain = vec![start];
        let mut prev = start;
        let mut cur = first;
        used.insert(edge_key(prev, cur));
        loop {
            chain.push(cur);
            if cur == start {
                break;
            }
            let next = links[&cur].iter().copied().find(|&n| !used.contains(&edge_key(cur, n)));
            match next {
                Some(n) => {
                    used.insert(edge_key(cur, n));
                    prev = cur;
                    cur = n;
                }
                None => break,
            }
        }
        let _ = prev;
        out.push(chain.iter().map(|&e| point_on(e)).collect());
    }
    out
}

/// Largest closed loop of the `level` iso-contour, as a polygon.
pub fn contour_polygon(field: &FieldSample, level: f64) -> Result<Polygon> {
    let mut best: Option<(f64, Vec<Point>)> = None;
    for mut line in contours(field, level) {
        if line.len() < 4 || line.first() != line.last() {
            continue;
        }
        line.pop();
        line.dedup();
        let a = signed_area(&line).abs();
        if best.as_ref().is_none_or(|(b, _)| a > *b) {
            best = Some((a, line));
        }
    }
    let (_, pts) = best.ok_or_else(|| Error::DegeneratePolygon("no closed contour at this level".into()))?;
    Polygon::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_grid(n: usize) -> Grid {
        Grid::over_box([-1.0, -1.0], [1.0, 1.0], n, n).unwrap()
    }

    #[test]
    fn orientation_is_normalized_and_degenerates_rejected() {
        let cw = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(cw.area() > 0.0);
        assert!(matches!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0]]), Err(Error::DegeneratePolygon(_))));
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),
            Err(Error::DegeneratePolygon(_))
        ));
        let bowtie = Polygon::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(bowtie, Err(Error::SelfIntersectingPolygon(..))));
    }

    #[test]
    fn circle_center_distance_is_radius_up_to_sagitta() {
        let r = 0.6;
        let n = 128;
        let poly = Polygon::regular([0.0, 0.0], r, n).unwrap();
        let sagitta = r * (1.0 - (PI / n as f64).cos());
        let g = box_grid(65);
        let sdf = sdf_from_polygon(&poly, &g);
        let center = sdf.values[g.index(32, 32)];
        assert!((center - r).abs() <= sagitta + 1e-12);
    }

    #[test]
    fn sigmoid_closed_forms() {
        let g = Grid::new([0.0, 0.0], [1.0, 1.0], 3, 1).unwrap();
        let sdf = FieldSample::new(g, vec![0.0, 50.0, 3f64.ln()]).unwrap();
        let ls = sigmoid_levelset(&sdf);
        assert_eq!(ls.values[0], 0.5);
        assert!((ls.values[1] - 1.0).abs() < 1e-12);
        assert!((ls.values[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weights_validation() {
        assert!(BarycentricWeights::new(vec![0.3, 0.3, 0.4]).is_ok());
        assert!(matches!(BarycentricWeights::new(vec![0.5, 0.4]), Err(Error::BadWeights(_))));
        assert!(matches!(BarycentricWeights::new(vec![1.2, -0.2]), Err(Error::BadWeights(_))));
        let u = BarycentricWeights::uniform(3).unwrap();
        assert_eq!(u.as_slice().iter().sum::<f64>(), 1.0);
        assert_eq!(BarycentricWeights::one_hot(4, 2).unwrap().one_hot_index(), Some(2));
    }

    #[test]
    fn one_hot_barycenter_is_endpoint() {
        let a = ParticleCloud::new(vec![[0.0, 0.0], [1.0, 0.5]], 0.02).unwrap();
        let b = ParticleCloud::new(vec![[0.2, 0.1], [0.7, 0.3]], 0.02).unwrap();
        let w = BarycentricWeights::one_hot(2, 1).unwrap();
        assert_eq!(barycenter_of(&[&a, &b], &w).unwrap().centers, b.centers);
        let half = BarycentricWeights::new(vec![0.5, 0.5]).unwrap();
        let m = barycenter_of(&[&a, &b], &half).unwrap();
        assert!((m.centers[1][0] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn levelset_from_cloud_peaks_at_one() {
        let g = box_grid(33);
        let c = ParticleCloud::new(vec![[0.1, 0.2], [0.13, -0.3]], 0.1).unwrap();
        let ls = levelset_from_cloud(&c, &g);
        assert_eq!(ls.values.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn membership_center_in_corner_out() {
        let g = box_grid(41);
        let poly = Polygon::regular([0.0, 0.0], 0.5, 64).unwrap();
        let dom = GeometryDomain::new(poly, &g, 1.0).unwrap();
        assert!(membership(&dom.levelset, [0.0, 0.0]).unwrap());
        assert!(!membership(&dom.levelset, [-1.0, 1.0]).unwrap());
        assert!(matches!(membership(&dom.levelset, [2.0, 0.0]), Err(Error::OutOfBox(..))));
    }

    #[test]
    fn unperturbed_star_is_regular() {
        let cfg = StarConfig { harmonics: 0, ..StarConfig::default() };
        let p = random_star_polygon(3, &cfg).unwrap();
        assert_eq!(p.len(), 256);
        for v in p.vertices() {
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 0.5).abs() < 1e-14);
        }
        let q = random_star_polygon(11, &StarConfig::default()).unwrap();
        let r = random_star_polygon(11, &StarConfig::default()).unwrap();
        assert_eq!(q, r);
    }

    #[test]
    fn ray_hits_circle_at_radius() {
        let poly = Polygon::regular([0.1, -0.2], 0.5, 360).unwrap();
        let hit = poly.ray_hit([0.1, -0.2], 0.3).unwrap();
        let d = ((hit[0] - 0.1).powi(2) + (hit[1] + 0.2).powi(2)).sqrt();
        assert!((d - 0.5).abs() < 0.5 * (1.0 - (PI / 360.0).cos()) + 1e-12);
    }

    #[test]
    fn contour_of_disk_levelset_is_circle() {
        let g = box_grid(101);
        let poly = Polygon::regular([0.0, 0.0], 0.6, 200).unwrap();
        let dom = GeometryDomain::new(poly, &g, 1.0).unwrap();
        let c = contour_polygon(&dom.levelset, 0.5).unwrap();
        for v in c.vertices() {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((r - 0.6).abs() < 0.02, "r = {r}");
        }
        assert!(c.area() > 0.0);
    }
}
