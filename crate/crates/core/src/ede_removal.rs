//! Removal of edge-enhancement halos by dual clustering.
//!
//! Propagation-based phase contrast leaves a bright rim (EDH) and a dark rim
//! (EDL) along grain boundaries. The bright rim sits close to the hydrate
//! intensity, so a direct three-phase clustering assigns it to hydrate. The
//! workflow here over-clusters a few slices, indexes the classes into
//! phases, measures each phase's raw intensity range, replaces every voxel
//! of the stack that falls in a phase range by the phase mean (the bright
//! rim by the quartz mean) and finally clusters the rescaled stack into
//! brine, quartz and hydrate starting from the phase means.
//!
//! Pre-filtering (non-local means followed by anisotropic diffusion) is
//! expected to have been applied to the input already.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_segment, ClusterResult, Distance, Init, KmeansConfig};
use crate::error::{Error, Result};
use crate::progress::{Monitor, Silent};
use crate::stats::{moments, Histogram};
use crate::volume::{LabelVolume, VoxelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Noise,
    Edl,
    Brine,
    Quartz,
    Edh,
    Hydrate,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Noise => "noise",
            Phase::Edl => "edl",
            Phase::Brine => "brine",
            Phase::Quartz => "quartz",
            Phase::Edh => "edh",
            Phase::Hydrate => "hydrate",
        }
    }

    /// Histogram bins used when inspecting the phase: coarse for the sparse
    /// noise and bright-rim phases, fine for the others.
    pub fn default_bins(self) -> usize {
        match self {
            Phase::Noise | Phase::Edh => 10,
            _ => 100,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "noise" => Phase::Noise,
            "edl" => Phase::Edl,
            "brine" => Phase::Brine,
            "quartz" => Phase::Quartz,
            "edh" => Phase::Edh,
            "hydrate" => Phase::Hydrate,
            other => return Err(Error::InvalidParameter(format!("unknown phase '{other}'"))),
        })
    }
}

/// Inclusive class-label interval of one phase in the over-clustered segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRange {
    pub phase: Phase,
    pub first: u8,
    pub last: u8,
    pub bins: usize,
}

impl PhaseRange {
    pub fn new(phase: Phase, first: u8, last: u8) -> Self {
        PhaseRange {
            phase,
            first,
            last,
            bins: phase.default_bins(),
        }
    }

    pub fn contains(&self, label: u8) -> bool {
        (self.first..=self.last).contains(&label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub phases: Vec<PhaseRange>,
}

impl Default for PhaseMap {
    /// noise = 0, EDL = 1-2, brine = 1-3, quartz = 4, EDH = 5, hydrate = 6-7.
    /// EDL and brine overlap on purpose: the brine range then spans the
    /// dark rim, which is replaced by the brine mean.
    fn default() -> Self {
        PhaseMap {
            phases: vec![
                PhaseRange::new(Phase::Noise, 0, 0),
                PhaseRange::new(Phase::Edl, 1, 2),
                PhaseRange::new(Phase::Brine, 1, 3),
                PhaseRange::new(Phase::Quartz, 4, 4),
                PhaseRange::new(Phase::Edh, 5, 5),
                PhaseRange::new(Phase::Hydrate, 6, 7),
            ],
        }
    }
}

impl PhaseMap {
    /// Fails on duplicate phases or reversed ranges; returns one warning per
    /// pair of phases whose label ranges overlap.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (i, a) in self.phases.iter().enumerate() {
            if a.first > a.last {
                return Err(Error::InvalidParameter(format!(
                    "phase {} has reversed label range {}-{}",
                    a.phase, a.first, a.last
                )));
            }
            for b in &self.phases[i + 1..] {
                if a.phase == b.phase {
                    return Err(Error::InvalidParameter(format!("phase {} listed twice", a.phase)));
                }
                if a.first <= b.last && b.first <= a.last {
                    warnings.push(format!(
                        "label ranges of {} ({}-{}) and {} ({}-{}) overlap",
                        a.phase, a.first, a.last, b.phase, b.first, b.last
                    ));
                }
            }
        }
        Ok(warnings)
    }

    pub fn get(&self, phase: Phase) -> Option<&PhaseRange> {
        self.phases.iter().find(|p| p.phase == phase)
    }
}

impl FromStr for PhaseMap {
    type Err = Error;

    /// `default`, or comma-separated `phase=first[-last]` entries such as
    /// `noise=0,edl=1-2,brine=1-3,quartz=4,edh=5,hydrate=6-7`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("default") {
            return Ok(PhaseMap::default());
        }
        let bad = |e: &str| Error::InvalidParameter(format!("bad phase map entry '{e}'"));
        let mut phases = Vec::new();
        for entry in s.split(',').filter(|e| !e.trim().is_empty()) {
            let (name, range) = entry.split_once('=').ok_or_else(|| bad(entry))?;
            let phase: Phase = name.parse()?;
            let (a, b) = range.split_once('-').unwrap_or((range, range));
            let first = a.trim().parse().map_err(|_| bad(entry))?;
            let last = b.trim().parse().map_err(|_| bad(entry))?;
            phases.push(PhaseRange::new(phase, first, last));
        }
        let map = PhaseMap { phases };
        map.validate()?;
        Ok(map)
    }
}

/// Raw-intensity statistics of one phase. `None` fields mark an empty phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: Phase,
    pub first: u8,
    pub last: u8,
    pub count: usize,
    pub min: Option<u16>,
    pub max: Option<u16>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Third standardised moment.
    pub skewness: Option<f64>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phases: Vec<PhaseStats>,
    /// Pairs of phases with disjoint label ranges whose intensity ranges intersect.
    pub overlaps: Vec<(Phase, Phase)>,
    pub warnings: Vec<String>,
}

impl PhaseReport {
    pub fn get(&self, phase: Phase) -> Option<&PhaseStats> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    pub fn mean_of(&self, phase: Phase) -> Result<f64> {
        self.get(phase)
            .and_then(|s| s.mean)
            .ok_or_else(|| Error::EmptyPhase(format!("phase {phase} has no voxels")))
    }
}

/// Collects the raw intensities under each phase's labels.
pub fn phase_index_stats(raw: &VoxelVolume, seg: &LabelVolume, map: &PhaseMap) -> Result<PhaseReport> {
    if raw.dims() != seg.dims() {
        return Err(Error::DimensionMismatch(format!(
            "raw volume is {} but segmentation is {}",
            raw.dims(),
            seg.dims()
        )));
    }
    let mut warnings = map.validate()?;
    let mut phases = Vec::with_capacity(map.phases.len());
    for r in &map.phases {
        let values: Vec<f64> = raw
            .data()
            .iter()
            .zip(seg.labels())
            .filter(|(_, &l)| r.contains(l))
            .map(|(&v, _)| v as f64)
            .collect();
        let stats = if values.is_empty() {
            warnings.push(format!("phase {} (labels {}-{}) is empty", r.phase, r.first, r.last));
            PhaseStats {
                phase: r.phase,
                first: r.first,
                last: r.last,
                count: 0,
                min: None,
                max: None,
                mean: None,
                std: None,
                skewness: None,
                histogram: Histogram::new(&[], r.bins),
            }
        } else {
            let (mean, std, skew) = moments(&values);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min) as u16;
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) as u16;
            PhaseStats {
                phase: r.phase,
                first: r.first,
                last: r.last,
                count: values.len(),
                min: Some(min),
                max: Some(max),
                mean: Some(mean),
                std: Some(std),
                skewness: Some(skew),
                histogram: Histogram::new(&values, r.bins),
            }
        };
        phases.push(stats);
    }
    let mut overlaps = Vec::new();
    for (i, a) in phases.iter().enumerate() {
        for b in &phases[i + 1..] {
            let labels_disjoint = a.last < b.first || b.last < a.first;
            if let (Some(amin), Some(amax), Some(bmin), Some(bmax)) = (a.min, a.max, b.min, b.max) {
                if labels_disjoint && amin <= bmax && bmin <= amax {
                    overlaps.push((a.phase, b.phase));
                }
            }
        }
    }
    Ok(PhaseReport {
        phases,
        overlaps,
        warnings,
    })
}

/// Which phase ranges get replaced, and by which phase's mean, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub rules: Vec<(Phase, Phase)>,
}

impl Default for Substitution {
    /// brine → brine, quartz → quartz, EDH → quartz, hydrate → hydrate.
    fn default() -> Self {
        Substitution {
            rules: vec![
                (Phase::Brine, Phase::Brine),
                (Phase::Quartz, Phase::Quartz),
                (Phase::Edh, Phase::Quartz),
                (Phase::Hydrate, Phase::Hydrate),
            ],
        }
    }
}

/// Replaces every voxel whose intensity lies in a replaced phase's
/// `[min, max]` by the substitute phase's rounded mean. Applies to the whole
/// volume regardless of which slices produced the statistics.
pub fn rescale_phases(raw: &VoxelVolume, report: &PhaseReport, subst: &Substitution) -> Result<VoxelVolume> {
    let mut ranges: Vec<(Phase, u16, u16, u16)> = Vec::new();
    for &(target, source) in &subst.rules {
        let s = report
            .get(target)
            .ok_or_else(|| Error::EmptyPhase(format!("phase {target} is not in the report")))?;
        let (Some(lo), Some(hi)) = (s.min, s.max) else {
            return Err(Error::EmptyPhase(format!("phase {target} has no voxels")));
        };
        let mean = raw.bit_depth().quantize(report.mean_of(source)?);
        for &(other, olo, ohi, _) in &ranges {
            if lo <= ohi && olo <= hi {
                return Err(Error::RangeOverlap(format!(
                    "{target} [{lo}, {hi}] overlaps {other} [{olo}, {ohi}]"
                )));
            }
        }
        ranges.push((target, lo, hi, mean));
    }
    let mut lut: Vec<u16> = (0..=raw.bit_depth().max_value()).collect();
    for &(_, lo, hi, mean) in &ranges {
        for v in &mut lut[lo as usize..=hi as usize] {
            *v = mean;
        }
    }
    Ok(raw.with_data(raw.data().iter().map(|&v| lut[v as usize]).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdeConfig {
    /// Classes of the over-clustering step.
    pub k1: usize,
    pub final_k: usize,
    pub mask_threshold: Option<u16>,
    /// Slices clustered in the over-clustering step; empty means all.
    pub seg_slices: Vec<usize>,
    pub map: PhaseMap,
    pub substitution: Substitution,
    /// Seeding of the over-clustering step and of a final step without
    /// mean-initialized centers.
    pub init: Init,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EdeConfig {
    fn default() -> Self {
        EdeConfig {
            k1: 7,
            final_k: 3,
            mask_threshold: Some(0),
            seg_slices: Vec::new(),
            map: PhaseMap::default(),
            substitution: Substitution::default(),
            init: Init::PlusPlus,
            restarts: 10,
            seed: 42,
        }
    }
}

pub struct EdeOutput {
    /// 1 = brine, 2 = quartz, 3 = hydrate, 0 = masked (for `final_k == 3`).
    pub final_labels: LabelVolume,
    pub final_centers: Vec<f64>,
    /// Over-clustering of the selected slices.
    pub stage_labels: ClusterResult,
    pub report: PhaseReport,
    pub rescaled: VoxelVolume,
    /// Findings that call for inspecting the histograms and repeating the
    /// indexing step with adjusted label ranges.
    pub advisory: Vec<String>,
}

/// Runs over-clustering, phase indexing, rescaling and final clustering.
pub fn dual_cluster_pipeline(raw: &VoxelVolume, cfg: &EdeConfig) -> Result<EdeOutput> {
    dual_cluster_pipeline_monitored(raw, cfg, &Silent)
}

pub fn dual_cluster_pipeline_monitored(
    raw: &VoxelVolume,
    cfg: &EdeConfig,
    monitor: &dyn Monitor,
) -> Result<EdeOutput> {
    let nz = raw.dims().nz;
    let slices: Vec<usize> = if cfg.seg_slices.is_empty() {
        (0..nz).collect()
    } else {
        cfg.seg_slices.clone()
    };
    if let Some(&z) = slices.iter().find(|&&z| z >= nz) {
        return Err(Error::OutOfBounds(format!("segmentation slice {z} outside {nz} slices")));
    }
    let stage_raw = raw.select_slices(&slices)?;
    let stage = kmeans_segment(
        &stage_raw,
        &KmeansConfig {
            k: cfg.k1,
            distance: Distance::SqEuclidean,
            restarts: cfg.restarts,
            init: cfg.init.clone(),
            mask_threshold: cfg.mask_threshold,
            seed: cfg.seed,
            ..Default::default()
        },
    )?;
    monitor.checkpoint(1, 4)?;

    let report = phase_index_stats(&stage_raw, &stage.labels, &cfg.map)?;
    let mut advisory = Vec::new();
    for (a, b) in &report.overlaps {
        advisory.push(format!(
            "intensity ranges of {a} and {b} overlap; inspect the histograms and repeat the \
             indexing step with adjusted label ranges"
        ));
    }
    for s in &report.phases {
        if let Some(k) = s.skewness.filter(|k| k.abs() > 1.0) {
            advisory.push(format!("phase {} histogram is skewed ({k:.2})", s.phase));
        }
    }
    monitor.checkpoint(2, 4)?;

    let rescaled = rescale_phases(raw, &report, &cfg.substitution)?;
    monitor.checkpoint(3, 4)?;

    let init = if cfg.final_k == 3 {
        Init::ProvidedCenters(vec![
            report.mean_of(Phase::Brine)?,
            report.mean_of(Phase::Quartz)?,
            report.mean_of(Phase::Hydrate)?,
        ])
    } else {
        cfg.init.clone()
    };
    let single_run = matches!(init, Init::ProvidedCenters(_));
    let fin = kmeans_segment(
        &rescaled,
        &KmeansConfig {
            k: cfg.final_k,
            distance: Distance::SqEuclidean,
            restarts: if single_run { 1 } else { cfg.restarts },
            init,
            mask_threshold: cfg.mask_threshold,
            seed: cfg.seed,
            ..Default::default()
        },
    )?;
    monitor.checkpoint(4, 4)?;
    let final_labels = if cfg.final_k == 3 {
        fin.labels
            .clone()
            .with_class_names(vec!["brine".into(), "quartz".into(), "hydrate".into()])?
    } else {
        fin.labels.clone()
    };
    Ok(EdeOutput {
        final_labels,
        final_centers: fin.centers,
        stage_labels: stage,
        report,
        rescaled,
        advisory,
    })
}

/// Counts of `labels` per phase, for reporting.
pub fn phase_counts(seg: &LabelVolume, map: &PhaseMap) -> BTreeMap<Phase, usize> {
    map.phases
        .iter()
        .map(|r| (r.phase, seg.labels().iter().filter(|&&l| r.contains(l)).count()))
        .collect()
}
