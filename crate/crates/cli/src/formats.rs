//! On-disk formats: `.otr` rasters, polygon and cloud text files, the
//! binary model container and the dataset manifest. Layouts are described in
//! `docs/format.md`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ots_core::geometry::Polygon;
use ots_core::matching::MatchedEnsemble;
use ots_core::surrogate::{ModelContainer, Provenance, Sgm, Ssm, SurrogateConfig};
use ots_core::{FieldSample, Grid, ParticleCloud, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const RASTER_MAGIC: &str = "OTR 1";
pub const MODEL_MAGIC: &[u8; 4] = b"OTSM";
pub const MODEL_VERSION: u16 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_f64(s: &str, what: &str) -> CliResult<f64> {
    s.trim().parse().map_err(|_| CliError::Format(format!("{what}: cannot parse {s:?} as a number")))
}

fn parse_usize(s: &str, what: &str) -> CliResult<usize> {
    s.trim().parse().map_err(|_| CliError::Format(format!("{what}: cannot parse {s:?} as a count")))
}

// ---------------------------------------------------------------- rasters

/// Encodes a field as `.otr`: a text header terminated by `data`, then the
/// values as little-endian f64 and the mask as one byte per node.
pub fn encode_raster(field: &FieldSample) -> Vec<u8> {
    let g = &field.grid;
    let mut head = String::new();
    writeln!(head, "{RASTER_MAGIC}").unwrap();
    writeln!(head, "nx {}", g.nx).unwrap();
    writeln!(head, "ny {}", g.ny).unwrap();
    writeln!(head, "origin {:?} {:?}", g.origin[0], g.origin[1]).unwrap();
    writeln!(head, "spacing {:?} {:?}", g.spacing[0], g.spacing[1]).unwrap();
    match field.integral {
        Some(i) => writeln!(head, "integral {i:?}").unwrap(),
        None => writeln!(head, "integral none").unwrap(),
    }
    writeln!(head, "data").unwrap();
    let mut out = head.into_bytes();
    out.reserve(g.len() * 9);
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(g.mask.iter().map(|&m| m as u8));
    out
}

pub fn decode_raster(bytes: &[u8]) -> CliResult<FieldSample> {
    let mut pos = 0;
    let mut next_line = || -> CliResult<&str> {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CliError::Format("raster header is truncated".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| CliError::Format("raster header is not UTF-8".into()))?;
        pos += end + 1;
        Ok(line)
    };
    if next_line()? != RASTER_MAGIC {
        return Err(CliError::Format("not an OTR raster".into()));
    }
    let mut nx = None;
    let mut ny = None;
    let mut origin = None;
    let mut spacing = None;
    let mut integral = None;
    loop {
        let line = next_line()?;
        if line == "data" {
            break;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        let pair = |what: &str| -> CliResult<Point> {
            match rest.as_slice() {
                [a, b] => Ok([parse_f64(a, what)?, parse_f64(b, what)?]),
                _ => Err(CliError::Format(format!("{what} needs two values"))),
            }
        };
        match key {
            "nx" => nx = Some(parse_usize(rest.first().unwrap_or(&""), "nx")?),
            "ny" => ny = Some(parse_usize(rest.first().unwrap_or(&""), "ny")?),
            "origin" => origin = Some(pair("origin")?),
            "spacing" => spacing = Some(pair("spacing")?),
            "integral" => {
                integral = match rest.first() {
                    Some(&"none") => None,
                    Some(v) => Some(parse_f64(v, "integral")?),
                    None => return Err(CliError::Format("integral needs a value".into())),
                }
            }
            other => return Err(CliError::Format(format!("unknown raster header key {other:?}"))),
        }
    }
    let missing = |k: &str| CliError::Format(format!("raster header lacks {k}"));
    let (nx, ny) = (nx.ok_or_else(|| missing("nx"))?, ny.ok_or_else(|| missing("ny"))?);
    let grid = Grid::new(origin.ok_or_else(|| missing("origin"))?, spacing.ok_or_else(|| missing("spacing"))?, nx, ny)?;
    let n = grid.len();
    let body = &bytes[pos..];
    if body.len() != n * 9 {
        return Err(CliError::Format(format!("raster payload has {} bytes, expected {}", body.len(), n * 9)));
    }
    let values = body[..n * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mask = body[n * 8..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(CliError::Format("raster mask bytes must be 0 or 1".into())),
        })
        .collect::<CliResult<Vec<bool>>>()?;
    let mut field = FieldSample::new(grid.with_mask(mask)?, values)?;
    field.integral = integral;
    Ok(field)
}

pub fn write_raster(path: &Path, field: &FieldSample) -> CliResult<()> {
    write_file(path, &encode_raster(field))
}

pub fn read_raster(path: &Path) -> CliResult<FieldSample> {
    decode_raster(&read_file(path)?)
}

// ------------------------------------------------------- polygons, clouds

/// One `x,y` row per vertex, without repeating the first vertex.
pub fn encode_polygon(poly: &Polygon) -> String {
    let mut s = String::from("x,y\n");
    for v in poly.vertices() {
        writeln!(s, "{:?},{:?}", v[0], v[1]).unwrap();
    }
    s
}

fn parse_xy_rows<'a>(lines: impl Iterator<Item = &'a str>, what: &str) -> CliResult<Vec<Point>> {
    lines
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',').ok_or_else(|| CliError::Format(format!("{what}: expected `x,y`, got {l:?}")))?;
            Ok([parse_f64(a, what)?, parse_f64(b, what)?])
        })
        .collect()
}

pub fn decode_polygon(text: &str) -> CliResult<Polygon> {
    let mut lines = text.lines().peekable();
    if lines.peek().is_some_and(|l| l.trim() == "x,y") {
        lines.next();
    }
    Ok(Polygon::new(parse_xy_rows(lines, "polygon")?)?)
}

pub fn read_polygon(path: &Path) -> CliResult<Polygon> {
    decode_polygon(&read_text(path)?)
}

/// Header row `n,sigma` followed by one `x,y` row per particle.
pub fn encode_cloud(cloud: &ParticleCloud) -> String {
    let mut s = format!("{},{:?}\n", cloud.n_particles(), cloud.sigma);
    for c in &cloud.centers {
        writeln!(s, "{:?},{:?}", c[0], c[1]).unwrap();
    }
    s
}

pub fn decode_cloud(text: &str) -> CliResult<ParticleCloud> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| CliError::Format("cloud file is empty".into()))?;
    let (n, sigma) = head.split_once(',').ok_or_else(|| CliError::Format("cloud header must be `n,sigma`".into()))?;
    let n = parse_usize(n, "cloud size")?;
    let centers = parse_xy_rows(lines, "cloud")?;
    if centers.len() != n {
        return Err(CliError::Format(format!("cloud header declares {n} particles, found {}", centers.len())));
    }
    Ok(ParticleCloud::new(centers, parse_f64(sigma, "cloud sigma")?)?)
}

// -------------------------------------------------------- model container

const TAG_CONFIG: [u8; 4] = *b"CONF";
const TAG_GRID: [u8; 4] = *b"GRID";
const TAG_SGM: [u8; 4] = *b"SGM ";
const TAG_SSM: [u8; 4] = *b"SSM ";
const TAG_ORDERINGS: [u8; 4] = *b"ORDR";
const TAG_PROVENANCE: [u8; 4] = *b"PROV";

fn bin<T: Serialize>(value: &T) -> Vec<u8> {
    bincode::serialize(value).expect("model sections serialize")
}

fn unbin<'a, T: Deserialize<'a>>(bytes: &'a [u8], what: &str) -> CliResult<T> {
    bincode::deserialize(bytes).map_err(|e| CliError::Format(format!("model section {what}: {e}")))
}

#[derive(Serialize, Deserialize)]
struct OrderingSection {
    orderings: Vec<Vec<usize>>,
    clouds: Vec<ParticleCloud>,
}

/// Serializes a model: magic, version, section count, then sections of
/// `tag (4 bytes) | length (u64) | payload`.
pub fn encode_model(model: &ModelContainer) -> Vec<u8> {
    let mut sections: Vec<([u8; 4], Vec<u8>)> = vec![
        (TAG_CONFIG, bin(&model.config)),
        (TAG_GRID, bin(&model.grid)),
        (TAG_SGM, bin(&model.sgm)),
    ];
    sections.extend(model.ssms.iter().map(|s| (TAG_SSM, bin(s))));
    sections.push((
        TAG_ORDERINGS,
        bin(&OrderingSection { orderings: model.solution_orderings.clone(), clouds: model.solution_clouds.clone() }),
    ));
    sections.push((TAG_PROVENANCE, bin(&model.provenance)));

    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (tag, payload) in sections {
        out.extend_from_slice(&tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> CliResult<ModelContainer> {
    let bad = |m: &str| CliError::Format(format!("model file: {m}"));
    if bytes.len() < 10 || &bytes[..4] != MODEL_MAGIC {
        return Err(bad("missing OTSM magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let mut pos = 10;
    let mut config: Option<SurrogateConfig> = None;
    let mut grid: Option<Grid> = None;
    let mut sgm: Option<Sgm> = None;
    let mut ssms: Vec<Ssm> = Vec::new();
    let mut orderings: Option<OrderingSection> = None;
    let mut provenance: Option<Provenance> = None;
    for _ in 0..count {
        if bytes.len() < pos + 12 {
            return Err(bad("truncated section header"));
        }
        let tag: [u8; 4] = bytes[pos..pos + 4].try_into().unwrap();
        let len = u64::from_le_bytes(bytes[pos + 4..pos + 12].try_into().unwrap()) as usize;
        pos += 12;
        let payload = bytes.get(pos..pos.saturating_add(len)).ok_or_else(|| bad("truncated section"))?;
        pos += len;
        match tag {
            TAG_CONFIG => config = Some(unbin(payload, "CONF")?),
            TAG_GRID => grid = Some(unbin(payload, "GRID")?),
            TAG_SGM => sgm = Some(unbin(payload, "SGM")?),
            TAG_SSM => ssms.push(unbin(payload, "SSM")?),
            TAG_ORDERINGS => orderings = Some(unbin(payload, "ORDR")?),
            TAG_PROVENANCE => provenance = Some(unbin(payload, "PROV")?),
            other => return Err(bad(&format!("unknown section {:?}", String::from_utf8_lossy(&other)))),
        }
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after the last section"));
    }
    let orderings = orderings.ok_or_else(|| bad("missing ORDR section"))?;
    let model = ModelContainer {
        config: config.ok_or_else(|| bad("missing CONF section"))?,
        grid: grid.ok_or_else(|| bad("missing GRID section"))?,
        sgm: sgm.ok_or_else(|| bad("missing SGM section"))?,
        ssms,
        solution_orderings: orderings.orderings,
        solution_clouds: orderings.clouds,
        provenance: provenance.ok_or_else(|| bad("missing PROV section"))?,
    };
    check_model(&model)?;
    Ok(model)
}

fn check_model(model: &ModelContainer) -> CliResult<()> {
    let bad = |m: String| CliError::Format(format!("model file: {m}"));
    let k = model.k();
    if k == 0 || model.sgm.k() != k || model.sgm.masks.len() != k || model.sgm.polygons.len() != k {
        return Err(bad(format!("inconsistent geometry count ({k} solution models, {} domains)", model.sgm.k())));
    }
    let n = model.config.n_s;
    if model.solution_orderings.iter().any(|o| o.len() != n || !ots_core::matching::is_permutation(o)) {
        return Err(bad("orderings must be permutations of the particle indices".into()));
    }
    if model.sgm.masks.iter().any(|m| m.len() != model.grid.len()) {
        return Err(bad("domain masks do not match the grid".into()));
    }
    let MatchedEnsemble { clouds, .. } = &model.sgm.ensemble;
    if clouds.iter().any(|c| c.n_particles() != model.sgm.n_g) {
        return Err(bad("domain clouds do not match n_g".into()));
    }
    Ok(())
}

pub fn write_model(path: &Path, model: &ModelContainer) -> CliResult<()> {
    write_file(path, &encode_model(model))
}

pub fn read_model(path: &Path) -> CliResult<ModelContainer> {
    decode_model(&read_file(path)?)
}

// ---------------------------------------------------------------- dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: Point,
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn of(grid: &Grid) -> Self {
        Self { origin: grid.origin, spacing: grid.spacing, nx: grid.nx, ny: grid.ny }
    }

    pub fn to_grid(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.origin, self.spacing, self.nx, self.ny)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub geometry: usize,
    pub index: usize,
    pub theta: f64,
    pub lambda: f64,
    pub file: String,
    pub sha256: String,
}

/// Index of a generated dataset with content hashes of every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub grid: GridSpec,
    pub steepness: f64,
    pub bounds: [[f64; 2]; 2],
    pub snapshots_per_geometry: usize,
    pub config_sha256: String,
    pub geometries: Vec<FileEntry>,
    pub snapshots: Vec<SnapshotEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Format(format!("manifest: {e}")))
    }
}
