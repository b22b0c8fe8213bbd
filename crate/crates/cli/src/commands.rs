//! Implementations of the `ots` subcommands, usable as a library.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ots_core::geometry::{self, BarycentricWeights, GeometryDomain, Polygon};
use ots_core::heat::{self, HeatProblem};
use ots_core::matching::{self, MultiMatchConfig};
use ots_core::surrogate::{self, derive_seed, Inference, ModelContainer, SurrogateConfig, TrainReport};
use ots_core::{FieldSample, Grid, ParticleCloud};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, FileEntry, GridSpec, Manifest, SnapshotEntry};

const TAG_DOMAIN: u64 = 101;
const TAG_DOE: u64 = 102;
const TAG_BENCH: u64 = 103;

/// Domains, parameters and solved snapshots of one data set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub grid: Grid,
    pub steepness: f64,
    pub domains: Vec<GeometryDomain>,
    /// `params[k][p] = [theta, lambda]`.
    pub params: Vec<Vec<Vec<f64>>>,
    pub snapshots: Vec<Vec<FieldSample>>,
}

impl Dataset {
    pub fn k(&self) -> usize {
        self.domains.len()
    }

    pub fn p(&self) -> usize {
        self.params.first().map_or(0, Vec::len)
    }
}

/// Training polygons: files listed in the config, or seeded star domains.
pub fn training_polygons(cfg: &RunConfig, seed: u64) -> CliResult<Vec<Polygon>> {
    if cfg.geometry.polygons.is_empty() {
        (0..cfg.geometry.count)
            .map(|k| Ok(geometry::random_star_polygon(derive_seed(seed, TAG_DOMAIN, k as u64), &cfg.geometry.star)?))
            .collect()
    } else {
        cfg.geometry.polygons.iter().map(|p| formats::read_polygon(Path::new(p))).collect()
    }
}

/// Reference grid over the shared box of `polys`.
pub fn reference_grid(cfg: &RunConfig, polys: &[Polygon]) -> CliResult<Grid> {
    let (lo, hi) = geometry::reference_box(polys, cfg.grid.margin)?;
    Ok(Grid::over_box(lo, hi, cfg.grid.nx, cfg.grid.ny)?)
}

pub fn solve_snapshot(domain: &GeometryDomain, cfg: &RunConfig, theta: f64, lambda: f64) -> CliResult<FieldSample> {
    let problem = HeatProblem::new(domain, cfg.heat.clone(), theta, lambda)?;
    Ok(heat::solve(&problem)?)
}

/// Generates domains, a Latin-hypercube plan shared by all domains, and the
/// solved snapshots.
pub fn build_dataset(cfg: &RunConfig, seed: u64) -> CliResult<Dataset> {
    cfg.validate()?;
    let polys = training_polygons(cfg, seed)?;
    let grid = reference_grid(cfg, &polys)?;
    let domains = polys
        .into_iter()
        .map(|p| GeometryDomain::new(p, &grid, cfg.geometry.steepness))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = heat::lhs_sample(&cfg.parameter_bounds(), cfg.doe.snapshots, derive_seed(seed, TAG_DOE, 0))?;
    let mut params = Vec::with_capacity(domains.len());
    let mut snapshots = Vec::with_capacity(domains.len());
    for (k, d) in domains.iter().enumerate() {
        let mut row = Vec::with_capacity(plan.len());
        for (p, s) in plan.samples.iter().enumerate() {
            log::info!("solving geometry {k} snapshot {p} (theta {:.4}, lambda {:.4})", s[0], s[1]);
            row.push(solve_snapshot(d, cfg, s[0], s[1])?);
        }
        params.push(plan.samples.clone());
        snapshots.push(row);
    }
    Ok(Dataset { grid, steepness: cfg.geometry.steepness, domains, params, snapshots })
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes polygons, rasters and the manifest under `dir`.
pub fn write_dataset(dir: &Path, ds: &Dataset, cfg: &RunConfig, seed: u64) -> CliResult<Manifest> {
    let mut geometries = Vec::new();
    for (k, d) in ds.domains.iter().enumerate() {
        let name = format!("geometry_{k:02}.csv");
        let text = formats::encode_polygon(&d.boundary);
        formats::write_file(&dir.join(&name), text.as_bytes())?;
        geometries.push(FileEntry { file: name, sha256: formats::sha256_hex(text.as_bytes()) });
    }
    let mut snapshots = Vec::new();
    for (k, row) in ds.snapshots.iter().enumerate() {
        for (p, field) in row.iter().enumerate() {
            let name = format!("snapshots/g{k:02}_p{p:03}.otr");
            let bytes = formats::encode_raster(field);
            formats::write_file(&dir.join(&name), &bytes)?;
            snapshots.push(SnapshotEntry {
                geometry: k,
                index: p,
                theta: ds.params[k][p][0],
                lambda: ds.params[k][p][1],
                file: name,
                sha256: formats::sha256_hex(&bytes),
            });
        }
    }
    let manifest = Manifest {
        format_version: 1,
        seed,
        grid: GridSpec::of(&ds.grid),
        steepness: ds.steepness,
        bounds: cfg.parameter_bounds(),
        snapshots_per_geometry: ds.p(),
        config_sha256: formats::sha256_hex(cfg.to_toml().as_bytes()),
        geometries,
        snapshots,
    };
    formats::write_file(&dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

pub fn cmd_generate(cfg: &RunConfig, seed: u64, out: &Path) -> CliResult<Manifest> {
    let t0 = Instant::now();
    let ds = build_dataset(cfg, seed)?;
    let manifest = write_dataset(out, &ds, cfg, seed)?;
    println!(
        "generated {} geometries x {} snapshots in {:.2} s -> {}",
        ds.k(),
        ds.p(),
        t0.elapsed().as_secs_f64(),
        out.join(MANIFEST_FILE).display()
    );
    Ok(manifest)
}

fn verified(dir: &Path, file: &str, sha: &str) -> CliResult<Vec<u8>> {
    let bytes = formats::read_file(&dir.join(file))?;
    if formats::sha256_hex(&bytes) != sha {
        return Err(CliError::Format(format!("{file}: content hash does not match the manifest")));
    }
    Ok(bytes)
}

/// Loads a dataset written by [`write_dataset`], checking every hash.
pub fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest = Manifest::from_json(&text)?;
    let grid = manifest.grid.to_grid()?;
    let mut domains = Vec::new();
    for g in &manifest.geometries {
        let bytes = verified(dir, &g.file, &g.sha256)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Format(format!("{}: not UTF-8", g.file)))?;
        domains.push(GeometryDomain::new(formats::decode_polygon(&text)?, &grid, manifest.steepness)?);
    }
    let k = domains.len();
    let p = manifest.snapshots_per_geometry;
    let mut params = vec![vec![Vec::new(); p]; k];
    let mut slots: Vec<Vec<Option<FieldSample>>> = vec![vec![None; p]; k];
    for s in &manifest.snapshots {
        if s.geometry >= k || s.index >= p {
            return Err(CliError::Format(format!("{}: index outside the manifest layout", s.file)));
        }
        let field = formats::decode_raster(&verified(dir, &s.file, &s.sha256)?)?;
        if !field.grid.same_lattice(&grid) {
            return Err(CliError::Format(format!("{}: raster grid differs from the manifest grid", s.file)));
        }
        params[s.geometry][s.index] = vec![s.theta, s.lambda];
        slots[s.geometry][s.index] = Some(field);
    }
    let snapshots = slots
        .into_iter()
        .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Format("manifest does not list every snapshot".into()))?;
    Ok(Dataset { grid, steepness: manifest.steepness, domains, params, snapshots })
}

/// Offline timings in the layout of the stage table.
pub fn format_report(report: &TrainReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<40} {:>18} {:>8} {:>12}", "Stage", "Per item (s)", "Items", "Total (s)").unwrap();
    let mut group = "";
    for st in &report.stages {
        if st.group != group {
            group = st.group;
            writeln!(s, "{group} Offline Stage").unwrap();
        }
        writeln!(s, "  {:<38} {:>18.4} {:>8} {:>12.3}", st.stage, st.per_item_seconds, st.items, st.total_seconds)
            .unwrap();
    }
    writeln!(s, "{:<40} {:>18} {:>8} {:>12.3}", "Total offline", "", "", report.offline_total()).unwrap();
    if report.not_converged > 0 {
        writeln!(s, "warning: {} decompositions hit the iteration cap", report.not_converged).unwrap();
    }
    s
}

pub fn train_dataset(ds: &Dataset, config: &SurrogateConfig, seed: u64) -> CliResult<(ModelContainer, TrainReport)> {
    Ok(surrogate::train(&ds.domains, &ds.snapshots, &ds.params, config, seed)?)
}

pub fn cmd_train(dataset: &Path, cfg: &RunConfig, seed: u64, out: &Path) -> CliResult<(ModelContainer, TrainReport)> {
    cfg.validate()?;
    let ds = load_dataset(dataset)?;
    let (model, report) = train_dataset(&ds, &cfg.surrogate, seed)?;
    formats::write_model(out, &model)?;
    print!("{}", format_report(&report));
    println!("model written to {}", out.display());
    Ok((model, report))
}

/// Which domain an inference or solve targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Geometry(usize),
    Weights(Vec<f64>),
}

impl Target {
    pub fn weights(&self, k: usize) -> CliResult<BarycentricWeights> {
        match self {
            Target::Geometry(g) if *g < k => Ok(BarycentricWeights::one_hot(k, *g)?),
            Target::Geometry(g) => Err(CliError::Usage(format!("geometry {g} out of range (model has {k})"))),
            Target::Weights(w) => Ok(BarycentricWeights::new(w.clone())?),
        }
    }
}

/// Runs one query. A single-geometry model only supports fixed-geometry
/// inference on its domain.
pub fn infer(model: &ModelContainer, theta: f64, lambda: f64, target: &Target) -> CliResult<Inference> {
    let q = [theta, lambda];
    if let (Target::Geometry(g), false) = (target, model.sgm.interpolating()) {
        return Ok(surrogate::infer_fixed_geometry(model, *g, &q)?);
    }
    let w = target.weights(model.k())?;
    Ok(surrogate::infer_cross_geometry(model, &q, &w)?)
}

pub fn cmd_infer(model: &Path, theta: f64, lambda: f64, target: &Target, out: &Path) -> CliResult<(Inference, f64)> {
    let model = formats::read_model(model)?;
    let t0 = Instant::now();
    let inference = infer(&model, theta, lambda, target)?;
    let wall = t0.elapsed().as_secs_f64();
    formats::write_raster(out, &inference.field)?;
    println!("inference wall time {:.4} s (integral {:.6e}) -> {}", wall, inference.integral, out.display());
    Ok((inference, wall))
}

/// Domain of `target` on the model grid.
pub fn target_domain(model: &ModelContainer, target: &Target, steepness: f64) -> CliResult<GeometryDomain> {
    let poly = match target {
        Target::Geometry(g) => {
            model.sgm.polygons.get(*g).cloned().ok_or_else(|| CliError::Usage(format!("geometry {g} out of range")))?
        }
        Target::Weights(_) => surrogate::blended_polygon(model, &target.weights(model.k())?)?,
    };
    Ok(GeometryDomain::new(poly, &model.grid, steepness)?)
}

/// Reference solve on a training or blended domain of a model.
pub fn cmd_solve(
    model: &Path,
    cfg: &RunConfig,
    theta: f64,
    lambda: f64,
    target: &Target,
    out: &Path,
) -> CliResult<(FieldSample, f64)> {
    let model = formats::read_model(model)?;
    let t0 = Instant::now();
    let domain = target_domain(&model, target, cfg.geometry.steepness)?;
    let field = solve_snapshot(&domain, cfg, theta, lambda)?;
    let wall = t0.elapsed().as_secs_f64();
    formats::write_raster(out, &field)?;
    println!("solve wall time {:.4} s -> {}", wall, out.display());
    Ok((field, wall))
}

/// One row of the matching benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub total_snapshots: usize,
    pub wall_seconds: f64,
    pub final_cost: f64,
}

/// GA settings of the sweep: fixed generation count, no early stop.
pub fn bench_matching_config(cfg: &RunConfig) -> MultiMatchConfig {
    MultiMatchConfig {
        population: cfg.bench.population,
        max_generations: cfg.bench.generations,
        stall_generations: cfg.bench.generations + 1,
        refine_sweeps: cfg.bench.refine_sweeps,
        ..cfg.surrogate.matching.clone()
    }
}

/// Clouds for the sweep: snapshots of all domains, interleaved so every
/// prefix spans the domains, decomposed with the bench resolution.
pub fn bench_clouds(cfg: &RunConfig, seed: u64) -> CliResult<Vec<ParticleCloud>> {
    let total = *cfg.bench.counts.iter().max().expect("validated non-empty");
    let k = if cfg.geometry.polygons.is_empty() { cfg.geometry.count } else { cfg.geometry.polygons.len() };
    let mut small = cfg.clone();
    small.doe.snapshots = total.div_ceil(k);
    let ds = build_dataset(&small, seed)?;
    let surrogate = SurrogateConfig { n_s: cfg.bench.n_s, sigma_s: cfg.bench.sigma_s, ..cfg.surrogate.clone() };
    let mut clouds = Vec::with_capacity(total);
    'outer: for p in 0..ds.p() {
        for k in 0..ds.k() {
            if clouds.len() == total {
                break 'outer;
            }
            let index = (p * ds.k() + k) as u64;
            let (d, _) = surrogate::decompose_snapshot(&ds.snapshots[k][p], &surrogate, derive_seed(seed, TAG_BENCH, index))?;
            clouds.push(d.cloud);
        }
    }
    Ok(clouds)
}

pub fn bench_sweep(cfg: &RunConfig, clouds: &[ParticleCloud], seed: u64) -> CliResult<Vec<BenchRow>> {
    let mcfg = bench_matching_config(cfg);
    let mut rows = Vec::new();
    for &count in &cfg.bench.counts {
        let subset = clouds
            .get(..count)
            .ok_or_else(|| CliError::Usage(format!("bench count {count} exceeds the {} available clouds", clouds.len())))?;
        let t0 = Instant::now();
        let ensemble = matching::match_multi(subset, &mcfg, seed)?;
        let wall = t0.elapsed().as_secs_f64();
        rows.push(BenchRow { total_snapshots: count, wall_seconds: wall, final_cost: ensemble.total_cost });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("total_snapshots,wall_seconds,final_cost\n");
    for r in rows {
        writeln!(s, "{},{:.6},{:?}", r.total_snapshots, r.wall_seconds, r.final_cost).unwrap();
    }
    s
}

pub fn cmd_bench(cfg: &RunConfig, seed: u64, out: Option<&PathBuf>) -> CliResult<Vec<BenchRow>> {
    cfg.validate()?;
    let clouds = bench_clouds(cfg, seed)?;
    let rows = bench_sweep(cfg, &clouds, seed)?;
    let csv = bench_csv(&rows);
    match out {
        Some(path) => formats::write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(rows)
}
