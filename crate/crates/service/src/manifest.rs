//! Run manifests: everything needed to repeat a run and check that it
//! produced the same bytes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use geoseg::progress::{Monitor, Scaled, Silent};
use geoseg::volume::crop;
use serde::{Deserialize, Serialize};

use crate::config::{ClassifySpec, RunConfig, Stage, TableSource};
use crate::error::{Result, ServiceError};
use crate::hash;
use crate::runner::{apply_stage, read_table, StageRecord, State};

pub const MANIFEST_FORMAT: &str = "geoseg-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool: String,
    /// The executed config with absolute paths and training tables inlined.
    pub config: RunConfig,
    /// Worker threads the run used; outputs do not depend on it.
    pub threads: usize,
    pub inputs: Vec<InputRecord>,
    /// Digest of the volume after loading and cropping.
    pub loaded: String,
    pub stages: Vec<StageRecord>,
    pub elapsed_ms: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Manifest(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(ServiceError::Manifest(format!(
                "{}: format '{}' is not {MANIFEST_FORMAT}",
                path.display(),
                m.format
            )));
        }
        if m.version > MANIFEST_VERSION {
            return Err(ServiceError::Manifest(format!(
                "{}: version {} is newer than supported {MANIFEST_VERSION}",
                path.display(),
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("serializable");
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| ServiceError::io(path, e))
    }
}

/// Replaces table paths by their contents so the config is self-contained.
pub fn inline_tables(cfg: &RunConfig) -> Result<RunConfig> {
    let mut cfg = cfg.clone();
    for s in &mut cfg.stages {
        if let Stage::Classify(ClassifySpec { table, .. }) = s {
            if let TableSource::Path(p) = table {
                *table = TableSource::Inline(read_table(p)?);
            }
        }
    }
    Ok(cfg)
}

pub fn hash_inputs(cfg: &RunConfig) -> Result<Vec<InputRecord>> {
    cfg.input
        .files()
        .into_iter()
        .map(|p| {
            let (sha256, bytes) = hash::file(p)?;
            Ok(InputRecord {
                path: p.to_path_buf(),
                sha256,
                bytes,
            })
        })
        .collect()
}

/// Runs `f` inside a dedicated pool of `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<(T, usize)> {
    match threads {
        None => Ok((f(), rayon::current_num_threads())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| ServiceError::config("--threads", "threads", e.to_string()))?;
            Ok((pool.install(f), n.max(1)))
        }
    }
}

/// Loads the input, applies the ROI and every stage, and writes the
/// manifest into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path, threads: Option<usize>) -> Result<Manifest> {
    run_monitored(cfg, out_dir, threads, &Silent)
}

pub fn run_monitored(
    cfg: &RunConfig,
    out_dir: &Path,
    threads: Option<usize>,
    monitor: &dyn Monitor,
) -> Result<Manifest> {
    cfg.validate("config")?;
    let cfg = inline_tables(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ServiceError::io(out_dir, e))?;
    let inputs = hash_inputs(&cfg)?;
    let start = Instant::now();
    let (outcome, used) = with_threads(threads, || execute(&cfg, out_dir, monitor))?;
    let (loaded, stages) = outcome?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        tool: format!("geoseg {}", env!("CARGO_PKG_VERSION")),
        config: cfg,
        threads: used,
        inputs,
        loaded,
        stages,
        elapsed_ms: start.elapsed().as_millis() as u64,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn execute(cfg: &RunConfig, out_dir: &Path, monitor: &dyn Monitor) -> Result<(String, Vec<StageRecord>)> {
    let mut vol = cfg.input.load()?;
    if let Some(roi) = &cfg.roi {
        vol = crop(&vol, roi)?;
    }
    let loaded = hash::volume(&vol);
    let mut state = State::new(vol);
    let n = cfg.stages.len() as f64;
    let mut records = Vec::with_capacity(cfg.stages.len());
    for (i, stage) in cfg.stages.iter().enumerate() {
        let scaled = Scaled {
            inner: monitor,
            start: i as f64 / n,
            span: 1.0 / n,
        };
        records.push(apply_stage(&mut state, i, stage, out_dir, &scaled)?.record);
    }
    Ok((loaded, records))
}

/// Outcome of re-running a manifest.
#[derive(Debug, Clone)]
pub struct Replay {
    pub original: Manifest,
    pub replayed: Manifest,
    /// One line per differing digest; empty when the replay is identical.
    pub mismatches: Vec<String>,
}

impl Replay {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Verifies the recorded input digests, re-runs the recorded config into
/// `out_dir` and compares every stage product and file digest.
pub fn replay(manifest: &Manifest, out_dir: &Path, threads: Option<usize>) -> Result<Replay> {
    for input in &manifest.inputs {
        let (sha, _) = hash::file(&input.path)?;
        if sha != input.sha256 {
            return Err(ServiceError::Manifest(format!(
                "input {} changed since the run: recorded {}, found {sha}",
                input.path.display(),
                input.sha256
            )));
        }
    }
    let replayed = run(&manifest.config, out_dir, threads)?;
    let mut mismatches = Vec::new();
    if replayed.loaded != manifest.loaded {
        mismatches.push(format!("loaded volume: {} vs {}", manifest.loaded, replayed.loaded));
    }
    if replayed.stages.len() != manifest.stages.len() {
        mismatches.push(format!(
            "{} stages recorded, {} replayed",
            manifest.stages.len(),
            replayed.stages.len()
        ));
    }
    for (a, b) in manifest.stages.iter().zip(&replayed.stages) {
        if a.product != b.product {
            mismatches.push(format!("stage {} ({}): {} vs {}", a.index, a.op, a.product, b.product));
        }
        if a.files != b.files {
            mismatches.push(format!("stage {} ({}): written files differ", a.index, a.op));
        }
    }
    Ok(Replay {
        original: manifest.clone(),
        replayed,
        mismatches,
    })
}
