//! Executes stages against an in-memory state. Shared by the CLI runner and
//! the HTTP job workers.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use geoseg::clustering::{fcm_segment, kmeans_segment};
use geoseg::ede_removal::{dual_cluster_pipeline_monitored, phase_counts};
use geoseg::filters::{anisotropic_diffusion_monitored, contrast_stretch, nlm_filter_monitored, smooth};
use geoseg::petrophysics::{
    pore_size_distribution, porosity, porosity_trend, rev_curve, volume_fractions, RevRegion,
};
use geoseg::progress::{Monitor, Scaled};
use geoseg::supervised::{classify_volume_monitored, extract_features, TrainingTable};
use geoseg::volume::{downsample, export_csv, export_raw, export_vtk, Table};
use geoseg::{LabelVolume, VoxelVolume};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{AnalyzeOp, AnalyzeSpec, ExportFormat, ExportSpec, Layer, Stage, TableSource};
use crate::error::{Result, ServiceError};
use crate::hash;

/// The current intensity volume and, once a segmentation stage ran, the
/// current label volume.
#[derive(Debug, Clone)]
pub struct State {
    pub volume: Arc<VoxelVolume>,
    pub labels: Option<Arc<LabelVolume>>,
}

impl State {
    pub fn new(volume: VoxelVolume) -> Self {
        State {
            volume: Arc::new(volume),
            labels: None,
        }
    }
}

/// A file written by a stage, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub op: String,
    /// Digest of what the stage produced: the new volume or label volume,
    /// the analysis document, or the exported file.
    pub product: String,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub record: StageRecord,
    pub summary: Value,
}

/// Loads a classification table given by path. `.csv` files are read as
/// CSV, anything else as JSON.
pub fn read_table(path: &Path) -> Result<TrainingTable> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok(TrainingTable::load_csv(path)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| ServiceError::config(path.display().to_string(), "rows", e.to_string()))
}

fn write_file(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<FileRecord> {
    let path = out_dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ServiceError::io(parent, e))?;
    }
    std::fs::write(&path, bytes).map_err(|e| ServiceError::io(&path, e))?;
    Ok(FileRecord {
        path: PathBuf::from(name),
        sha256: hash::bytes(bytes),
    })
}

fn record_file(out_dir: &Path, name: &str) -> Result<FileRecord> {
    let (sha256, _) = hash::file(&out_dir.join(name))?;
    Ok(FileRecord {
        path: PathBuf::from(name),
        sha256,
    })
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// Applies one stage. `index` numbers the stage within its run and prefixes
/// every file the stage writes into `out_dir`.
pub fn apply_stage(
    state: &mut State,
    index: usize,
    stage: &Stage,
    out_dir: &Path,
    monitor: &dyn Monitor,
) -> Result<StageOutcome> {
    let wrap = |e: geoseg::Error| ServiceError::Stage {
        index,
        op: stage.op().to_string(),
        source: e,
    };
    apply_inner(state, index, stage, out_dir, monitor).map_err(|e| match e {
        ServiceError::Core(c) => wrap(c),
        other => other,
    })
}

fn apply_inner(
    state: &mut State,
    index: usize,
    stage: &Stage,
    out_dir: &Path,
    monitor: &dyn Monitor,
) -> Result<StageOutcome> {
    let prefix = format!("stage{index:02}");
    let vol = state.volume.clone();
    let mut files = Vec::new();

    let set_volume = |state: &mut State, v: VoxelVolume| {
        let product = hash::volume(&v);
        let summary = json!({
            "dims": v.dims(),
            "mean": v.mean(),
            "voxel_size": v.voxel_size(),
        });
        state.volume = Arc::new(v);
        (product, summary)
    };
    let set_labels = |state: &mut State, l: LabelVolume, mut summary: Value| {
        let product = hash::labels(&l);
        summary["k"] = json!(l.k());
        summary["counts"] = json!(l.counts());
        state.labels = Some(Arc::new(l));
        (product, summary)
    };

    let (product, summary) = match stage {
        Stage::Nlm(p) => set_volume(state, nlm_filter_monitored(&vol, p, monitor)?),
        Stage::Ad(p) => set_volume(state, anisotropic_diffusion_monitored(&vol, p, monitor)?),
        Stage::Smooth(s) => set_volume(state, smooth(&vol, s.method, s.radius, s.sigma)?),
        Stage::Contrast(c) => set_volume(state, contrast_stretch(&vol, c.low_pct, c.high_pct)?),
        Stage::Downsample(d) => set_volume(state, downsample(&vol, d.factor)?),
        Stage::Kmeans(cfg) => {
            let r = kmeans_segment(&vol, cfg)?;
            let summary = json!({
                "centers": r.centers,
                "objective": r.objective,
                "iterations": r.iterations_used,
            });
            set_labels(state, r.labels, summary)
        }
        Stage::Fcm(cfg) => {
            let r = fcm_segment(&vol, cfg)?;
            let summary = json!({
                "centers": r.centers,
                "objective": r.objective,
                "iterations": r.iterations_used,
            });
            set_labels(state, r.labels, summary)
        }
        Stage::Ede(cfg) => {
            let out = dual_cluster_pipeline_monitored(&vol, cfg, monitor)?;
            let counts = phase_counts(&out.stage_labels.labels, &cfg.map);
            let report = json!({
                "stage_centers": out.stage_labels.centers,
                "phase_counts": counts,
                "phases": out.report.phases,
                "overlaps": out.report.overlaps,
                "warnings": out.report.warnings,
                "advisory": out.advisory,
                "final_centers": out.final_centers,
            });
            files.push(write_file(out_dir, &format!("{prefix}-ede.json"), &pretty(&report))?);
            let summary = json!({
                "final_centers": out.final_centers,
                "advisory": out.advisory,
            });
            set_labels(state, out.final_labels, summary)
        }
        Stage::Classify(spec) => {
            let table = match &spec.table {
                TableSource::Inline(t) => t.clone(),
                TableSource::Path(p) => read_table(p)?,
            };
            table.validate(vol.dims())?;
            let features = extract_features(&vol, &table)?;
            let model = spec.trainer.train(&features)?;
            monitor.checkpoint(1, 10)?;
            let labels = classify_volume_monitored(
                &model,
                &vol,
                &Scaled {
                    inner: monitor,
                    start: 0.1,
                    span: 0.9,
                },
            )?;
            files.push(write_file(out_dir, &format!("{prefix}-model.json"), model.to_json().as_bytes())?);
            let summary = json!({
                "classes": model.classes(),
                "training_accuracy": model.accuracy(&features),
                "training_rows": table.rows.len(),
            });
            set_labels(state, labels, summary)
        }
        Stage::AsLabels(spec) => {
            let data = vol.data();
            if let Some(&bad) = data.iter().find(|&&v| v > 255) {
                return Err(geoseg::Error::InvalidParameter(format!("label {bad} does not fit in 8 bits")).into());
            }
            let max = data.iter().copied().max().unwrap_or(0) as u8;
            let k = spec.k.unwrap_or(max);
            let labels = LabelVolume::new(
                vol.dims(),
                vol.voxel_size(),
                k,
                data.iter().map(|&v| v as u8).collect(),
            )?;
            set_labels(state, labels, json!({}))
        }
        Stage::Analyze(spec) => {
            let labels = state.labels.clone().expect("validated: labels precede analysis");
            let (doc, tables) = analyze(&labels, spec)?;
            let bytes = pretty(&doc);
            files.push(write_file(out_dir, &format!("{prefix}-analysis.json"), &bytes)?);
            for (op, table) in tables {
                let name = format!("{prefix}-{}.csv", op.name());
                files.push(write_file(out_dir, &name, table.to_csv_string().as_bytes())?);
            }
            (hash::bytes(&bytes), doc)
        }
        Stage::Export(spec) => {
            export(state, spec, out_dir)?;
            let rec = record_file(out_dir, &spec.file)?;
            let product = rec.sha256.clone();
            files.push(rec);
            (product, json!({ "file": spec.file }))
        }
    };
    monitor.report(1.0);
    Ok(StageOutcome {
        record: StageRecord {
            index,
            op: stage.op().to_string(),
            product,
            files,
        },
        summary,
    })
}

/// Default REV cube edges: powers of two from 8 up to the smallest dimension.
pub fn default_rev_edges(labels: &LabelVolume) -> Vec<usize> {
    let d = labels.dims();
    let lim = d.nx.min(d.ny).min(d.nz);
    let mut edges: Vec<usize> = std::iter::successors(Some(8usize), |e| Some(e * 2))
        .take_while(|&e| e <= lim)
        .collect();
    if edges.last() != Some(&lim) {
        edges.push(lim);
    }
    edges
}

/// Runs the requested analyses. Returns the JSON document, keyed by
/// analysis name, and one CSV table per analysis.
pub fn analyze(labels: &LabelVolume, spec: &AnalyzeSpec) -> Result<(Value, Vec<(AnalyzeOp, Table)>)> {
    let mut doc = serde_json::Map::new();
    let mut tables = Vec::new();
    let mut ops = spec.ops.clone();
    ops.sort();
    ops.dedup();
    for op in ops {
        let (value, table) = analysis(labels, spec, op)?;
        doc.insert(op.name().to_string(), value);
        tables.push((op, table));
    }
    Ok((Value::Object(doc), tables))
}

/// One analysis as JSON plus its CSV table.
pub fn analysis(labels: &LabelVolume, spec: &AnalyzeSpec, op: AnalyzeOp) -> Result<(Value, Table)> {
    let pc = spec.pore_class;
    Ok(match op {
        AnalyzeOp::Porosity => {
            let p = porosity(labels, pc)?;
            let mut t = Table::new(["pore_class", "porosity"]);
            t.push(vec![pc as f64, p]);
            (json!({ "pore_class": pc, "porosity": p }), t)
        }
        AnalyzeOp::Fractions => {
            let f = volume_fractions(labels)?;
            let mut t = Table::new(["class", "fraction"]);
            for (&c, &v) in &f {
                t.push(vec![c as f64, v]);
            }
            let map: serde_json::Map<String, Value> = f.iter().map(|(c, v)| (c.to_string(), json!(v))).collect();
            (Value::Object(map), t)
        }
        AnalyzeOp::Trend => {
            let tr = porosity_trend(labels, pc)?;
            let mut t = Table::new(["slice", "porosity", "fit"]);
            for (z, &p) in tr.porosities.iter().enumerate() {
                t.push(vec![z as f64, p, tr.intercept + tr.slope * z as f64]);
            }
            (json!(tr), t)
        }
        AnalyzeOp::Psd => {
            let vs = spec.voxel_size.unwrap_or(labels.voxel_size());
            let r = pore_size_distribution(labels, pc, vs, &spec.psd)?;
            let mut t = Table::new(["region", "voxels", "diameter"]);
            for (i, (&n, &dia)) in r.region_voxels.iter().zip(&r.diameters).enumerate() {
                t.push(vec![(i + 1) as f64, n as f64, dia]);
            }
            (json!(r), t)
        }
        AnalyzeOp::Rev => {
            let edges = spec.rev_edges.clone().unwrap_or_else(|| default_rev_edges(labels));
            let c = rev_curve(labels, pc, &edges, &spec.rev)?;
            let mut t = Table::new(["edge", "porosity", "stable"]);
            for s in &c.samples {
                t.push(vec![s.edge as f64, s.porosity, (s.region == RevRegion::Stable) as u8 as f64]);
            }
            (json!(c), t)
        }
    })
}

fn export(state: &State, spec: &ExportSpec, out_dir: &Path) -> Result<()> {
    let path = out_dir.join(&spec.file);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ServiceError::io(parent, e))?;
    }
    let labels = || state.labels.as_deref().expect("validated: labels precede label export");
    match (spec.format, spec.layer) {
        (ExportFormat::Vtk, Layer::Volume) => export_vtk(&*state.volume, &path, spec.encoding)?,
        (ExportFormat::Vtk, Layer::Labels) => export_vtk(labels(), &path, spec.encoding)?,
        (ExportFormat::Raw, Layer::Volume) => export_raw(&state.volume, &path, spec.byte_order)?,
        (ExportFormat::Raw, Layer::Labels) => {
            std::fs::write(&path, labels().labels()).map_err(|e| ServiceError::io(&path, e))?
        }
        (ExportFormat::Csv, _) => {
            let (_, table) = analysis(labels(), &AnalyzeSpec {
                pore_class: spec.pore_class,
                ..AnalyzeSpec::new(vec![AnalyzeOp::Trend])
            }, AnalyzeOp::Trend)?;
            export_csv(&table, &path)?
        }
    }
    Ok(())
}
