#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use ots_cli::commands::{cmd_generate, cmd_train};
use ots_cli::RunConfig;
use ots_core::matching::MultiMatchConfig;
use ots_core::surrogate::ModelContainer;
use tempfile::TempDir;

/// Small but complete run: three domains, eight snapshots each.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid.nx = 36;
    cfg.grid.ny = 36;
    cfg.geometry.count = 3;
    cfg.geometry.star.vertices = 96;
    cfg.doe.snapshots = 8;
    cfg.surrogate.n_s = 30;
    cfg.surrogate.sigma_s = 0.09;
    cfg.surrogate.n_g = 60;
    cfg.surrogate.sigma_g = 0.07;
    cfg.surrogate.matching = MultiMatchConfig { population: 16, max_generations: 20, ..MultiMatchConfig::default() };
    cfg.bench.counts = vec![6, 12];
    cfg.bench.n_s = 12;
    cfg.bench.generations = 3;
    cfg.bench.population = 8;
    cfg
}

pub struct Trained {
    pub dir: TempDir,
    pub cfg: RunConfig,
    pub model: ModelContainer,
}

impl Trained {
    pub fn dataset(&self) -> PathBuf {
        self.dir.path().join("ds")
    }

    pub fn model_path(&self) -> PathBuf {
        self.dir.path().join("model.otsm")
    }
}

pub fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        cmd_generate(&cfg, 5, &dir.path().join("ds")).unwrap();
        let (model, _) = cmd_train(&dir.path().join("ds"), &cfg, 5, &dir.path().join("model.otsm")).unwrap();
        Trained { dir, cfg, model }
    })
}
