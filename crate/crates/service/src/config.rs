//! Declarative run configuration.
//!
//! A run loads one volume, optionally crops it, and applies a chain of
//! stages. Filter stages replace the current intensity volume, segmentation
//! stages produce the current label volume, and analysis and export stages
//! read them and write files.
//!
//! ```toml
//! [input]
//! kind = "raw"
//! path = "berea.raw"
//! dims = [400, 400, 400]
//! bits = 8
//! voxel_size = 0.74
//!
//! [roi]
//! x0 = 0
//! y0 = 0
//! z0 = 0
//! dx = 200
//! dy = 200
//! dz = 200
//!
//! [[stage]]
//! op = "kmeans"
//! k = 3
//!
//! [[stage]]
//! op = "analyze"
//! ops = ["porosity", "trend", "psd"]
//! pore_class = 1
//! ```

use std::path::{Component, Path, PathBuf};

use geoseg::clustering::{FcmConfig, KmeansConfig};
use geoseg::ede_removal::EdeConfig;
use geoseg::filters::{AdParams, NlmParams, SmoothMethod};
use geoseg::petrophysics::{PsdParams, RevOptions};
use geoseg::supervised::{Trainer, TrainingTable};
use geoseg::volume::{load_raw, load_tiff_stack, ByteOrder, RawSpec, VtkEncoding};
use geoseg::{BitDepth, Dims, Roi, VoxelVolume};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

fn one() -> f64 {
    1.0
}

/// Where the intensity volume comes from. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    Raw {
        path: PathBuf,
        dims: [usize; 3],
        bits: u32,
        #[serde(default)]
        byte_order: ByteOrder,
        #[serde(default = "one")]
        voxel_size: f64,
        #[serde(default)]
        transpose_slices: bool,
    },
    /// One 2D image per slice, in the given order.
    Tiff {
        paths: Vec<PathBuf>,
        #[serde(default = "one")]
        voxel_size: f64,
    },
}

impl Source {
    pub fn files(&self) -> Vec<&Path> {
        match self {
            Source::Raw { path, .. } => vec![path.as_path()],
            Source::Tiff { paths, .. } => paths.iter().map(PathBuf::as_path).collect(),
        }
    }

    /// Same source with every path made absolute against `base`.
    pub fn resolved(&self, base: &Path) -> Source {
        let abs = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        match self {
            Source::Raw {
                path,
                dims,
                bits,
                byte_order,
                voxel_size,
                transpose_slices,
            } => Source::Raw {
                path: abs(path),
                dims: *dims,
                bits: *bits,
                byte_order: *byte_order,
                voxel_size: *voxel_size,
                transpose_slices: *transpose_slices,
            },
            Source::Tiff { paths, voxel_size } => Source::Tiff {
                paths: paths.iter().map(abs).collect(),
                voxel_size: *voxel_size,
            },
        }
    }

    pub fn load(&self) -> geoseg::Result<VoxelVolume> {
        match self {
            Source::Raw {
                path,
                dims,
                bits,
                byte_order,
                voxel_size,
                transpose_slices,
            } => {
                let spec = RawSpec {
                    transpose_slices: *transpose_slices,
                    ..RawSpec::new(Dims::new(dims[0], dims[1], dims[2]), BitDepth::from_bits(*bits)?)
                        .byte_order(*byte_order)
                        .voxel_size(*voxel_size)
                };
                load_raw(path, &spec)
            }
            Source::Tiff { paths, voxel_size } => load_tiff_stack(paths, *voxel_size),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothSpec {
    pub method: SmoothMethod,
    pub radius: usize,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastSpec {
    pub low_pct: f64,
    pub high_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownsampleSpec {
    pub factor: usize,
}

/// A training table given by path (CSV or JSON) or written out inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    Path(PathBuf),
    Inline(TrainingTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    /// Pixel coordinates refer to the volume as it enters this stage.
    pub table: TableSource,
    pub trainer: Trainer,
}

/// Reinterprets the current intensity volume as a label volume, for runs
/// that start from a saved segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsLabelsSpec {
    /// Number of classes; defaults to the largest label present.
    pub k: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzeOp {
    Porosity,
    Fractions,
    Trend,
    Psd,
    Rev,
}

impl AnalyzeOp {
    pub fn name(self) -> &'static str {
        match self {
            AnalyzeOp::Porosity => "porosity",
            AnalyzeOp::Fractions => "fractions",
            AnalyzeOp::Trend => "trend",
            AnalyzeOp::Psd => "psd",
            AnalyzeOp::Rev => "rev",
        }
    }
}

impl std::str::FromStr for AnalyzeOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "porosity" => Ok(AnalyzeOp::Porosity),
            "fractions" => Ok(AnalyzeOp::Fractions),
            "trend" => Ok(AnalyzeOp::Trend),
            "psd" => Ok(AnalyzeOp::Psd),
            "rev" => Ok(AnalyzeOp::Rev),
            other => Err(format!("unknown analysis '{other}' (porosity, fractions, trend, psd, rev)")),
        }
    }
}

fn pore_class_default() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSpec {
    pub ops: Vec<AnalyzeOp>,
    #[serde(default = "pore_class_default")]
    pub pore_class: u8,
    /// Physical voxel edge for PSD diameters; defaults to the volume's own.
    #[serde(default)]
    pub voxel_size: Option<f64>,
    #[serde(default)]
    pub psd: PsdParams,
    /// Cube edges of the REV curve; defaults to 8, 16, 32, ... up to the
    /// smallest dimension.
    #[serde(default)]
    pub rev_edges: Option<Vec<usize>>,
    #[serde(default)]
    pub rev: RevOptions,
}

impl AnalyzeSpec {
    pub fn new(ops: Vec<AnalyzeOp>) -> Self {
        AnalyzeSpec {
            ops,
            pore_class: 1,
            voxel_size: None,
            psd: PsdParams::default(),
            rev_edges: None,
            rev: RevOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Volume,
    Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Vtk,
    Raw,
    /// Per-slice porosity of a label volume.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSpec {
    pub layer: Layer,
    pub format: ExportFormat,
    /// Output file name, relative to the run directory.
    pub file: String,
    #[serde(default)]
    pub encoding: VtkEncoding,
    #[serde(default)]
    pub byte_order: ByteOrder,
    #[serde(default = "pore_class_default")]
    pub pore_class: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Stage {
    Nlm(NlmParams),
    Ad(AdParams),
    Smooth(SmoothSpec),
    Contrast(ContrastSpec),
    Downsample(DownsampleSpec),
    Kmeans(KmeansConfig),
    Fcm(FcmConfig),
    Ede(EdeConfig),
    Classify(ClassifySpec),
    AsLabels(AsLabelsSpec),
    Analyze(AnalyzeSpec),
    Export(ExportSpec),
}

impl Stage {
    pub fn op(&self) -> &'static str {
        match self {
            Stage::Nlm(_) => "nlm",
            Stage::Ad(_) => "ad",
            Stage::Smooth(_) => "smooth",
            Stage::Contrast(_) => "contrast",
            Stage::Downsample(_) => "downsample",
            Stage::Kmeans(_) => "kmeans",
            Stage::Fcm(_) => "fcm",
            Stage::Ede(_) => "ede",
            Stage::Classify(_) => "classify",
            Stage::AsLabels(_) => "as-labels",
            Stage::Analyze(_) => "analyze",
            Stage::Export(_) => "export",
        }
    }

    /// Stages that replace the intensity volume.
    pub fn is_filter(&self) -> bool {
        matches!(
            self,
            Stage::Nlm(_) | Stage::Ad(_) | Stage::Smooth(_) | Stage::Contrast(_) | Stage::Downsample(_)
        )
    }

    /// Stages that produce a label volume.
    pub fn is_segmentation(&self) -> bool {
        matches!(
            self,
            Stage::Kmeans(_) | Stage::Fcm(_) | Stage::Ede(_) | Stage::Classify(_) | Stage::AsLabels(_)
        )
    }

    /// Parameter checks that need no data. Errors name the offending field.
    pub fn check(&self) -> std::result::Result<(), (String, String)> {
        let core = |r: geoseg::Result<()>, field: &str| r.map_err(|e| (field.to_string(), e.to_string()));
        match self {
            Stage::Nlm(p) => core(p.validate(), "search_window"),
            Stage::Ad(p) => core(p.validate(), "threshold"),
            Stage::Smooth(s) if s.radius < 1 => Err(("radius".into(), "must be >= 1".into())),
            Stage::Contrast(c) if !(0.0 <= c.low_pct && c.low_pct < c.high_pct && c.high_pct <= 100.0) => Err((
                "low_pct".into(),
                format!("need 0 <= low_pct < high_pct <= 100, got {} and {}", c.low_pct, c.high_pct),
            )),
            Stage::Downsample(d) if d.factor < 1 => Err(("factor".into(), "must be >= 1".into())),
            Stage::Kmeans(c) if c.k < 1 => Err(("k".into(), "must be >= 1".into())),
            Stage::Kmeans(c) => core(c.validate(), "k"),
            Stage::Fcm(c) if c.c < 1 => Err(("c".into(), "must be >= 1".into())),
            Stage::Fcm(c) => core(c.validate(), "m"),
            Stage::Ede(c) if c.k1 < 1 || c.final_k < 1 => Err(("k1".into(), "cluster counts must be >= 1".into())),
            Stage::Ede(c) => core(c.map.validate().map(|_| ()), "map"),
            Stage::Classify(c) => match c.trainer {
                Trainer::Lssvm(p) => core(p.validate(), "trainer"),
                Trainer::Ensemble(p) if p.n_learners < 1 => Err(("trainer.n_learners".into(), "must be >= 1".into())),
                Trainer::Ensemble(_) => Ok(()),
            },
            Stage::Analyze(a) if a.ops.is_empty() => Err(("ops".into(), "list at least one analysis".into())),
            Stage::Analyze(a) if a.pore_class == 0 => Err(("pore_class".into(), "class 0 marks masked voxels".into())),
            Stage::Analyze(a) if a.voxel_size.is_some_and(|v| !(v > 0.0)) => {
                Err(("voxel_size".into(), "must be > 0".into()))
            }
            Stage::Export(e) => check_relative(&e.file).map_err(|m| ("file".to_string(), m)),
            _ => Ok(()),
        }
    }
}

fn check_relative(file: &str) -> std::result::Result<(), String> {
    let p = Path::new(file);
    if file.is_empty() || p.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(format!("'{file}' must be a plain relative path inside the run directory"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Roi>,
    #[serde(rename = "stage", default)]
    pub stages: Vec<Stage>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ServiceError::config(origin, "", e.to_string().trim_end()))?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    /// Reads a TOML config and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg.resolved(&base))
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        self.input = self.input.resolved(base);
        for s in &mut self.stages {
            if let Stage::Classify(ClassifySpec {
                table: TableSource::Path(p),
                ..
            }) = s
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        self
    }

    /// Structural checks: a non-empty chain whose analysis and export stages
    /// have something to read.
    pub fn validate(&self, origin: &str) -> Result<()> {
        if self.stages.is_empty() {
            return Err(ServiceError::config(origin, "stage", "at least one stage is required"));
        }
        match &self.input {
            Source::Raw { dims, bits, voxel_size, .. } => {
                if dims.contains(&0) {
                    return Err(ServiceError::config(origin, "input.dims", "every dimension must be >= 1"));
                }
                if *bits != 8 && *bits != 16 {
                    return Err(ServiceError::config(origin, "input.bits", format!("must be 8 or 16, got {bits}")));
                }
                if !(*voxel_size > 0.0) {
                    return Err(ServiceError::config(origin, "input.voxel_size", "must be > 0"));
                }
            }
            Source::Tiff { paths, voxel_size } => {
                if paths.is_empty() {
                    return Err(ServiceError::config(origin, "input.paths", "list at least one image"));
                }
                if !(*voxel_size > 0.0) {
                    return Err(ServiceError::config(origin, "input.voxel_size", "must be > 0"));
                }
            }
        }
        if let (Some(roi), Source::Raw { dims, .. }) = (&self.roi, &self.input) {
            roi.validate(Dims::new(dims[0], dims[1], dims[2]))
                .map_err(|e| ServiceError::config(origin, "roi", e.to_string()))?;
        }
        let mut have_labels = false;
        for (i, s) in self.stages.iter().enumerate() {
            s.check()
                .map_err(|(field, msg)| ServiceError::config(origin, format!("stage[{i}].{field}"), msg))?;
            let needs_labels = match s {
                Stage::Analyze(_) => true,
                Stage::Export(e) => e.layer == Layer::Labels || e.format == ExportFormat::Csv,
                _ => false,
            };
            if needs_labels && !have_labels {
                return Err(ServiceError::config(
                    origin,
                    format!("stage[{i}]"),
                    format!("{} needs a label volume from an earlier stage", s.op()),
                ));
            }
            have_labels |= s.is_segmentation();
        }
        Ok(())
    }
}
