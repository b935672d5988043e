//! Unsupervised segmentation of scalar intensities.
//!
//! Both algorithms work on [`Samples`]: the distinct unmasked intensities of
//! a volume together with their voxel counts. Every voxel with the same
//! intensity always receives the same label, so clustering the compressed
//! histogram gives exactly the result of clustering every voxel while the
//! cost no longer grows with the volume size.

mod fcm;
mod kmeans;

pub use fcm::{fcm_fit, fcm_segment, FcmConfig, FcmFit};
pub use kmeans::{kmeans_fit, kmeans_segment, Distance, Init, KmeansConfig, KmeansFit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, VoxelVolume};

/// Distinct intensities (ascending) with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Samples {
    /// Builds samples from raw observations; duplicates are merged.
    pub fn from_values(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let mut out = Samples {
            values: Vec::new(),
            weights: Vec::new(),
        };
        for x in v {
            if out.values.last() == Some(&x) {
                *out.weights.last_mut().unwrap() += 1.0;
            } else {
                out.values.push(x);
                out.weights.push(1.0);
            }
        }
        out
    }

    /// Unmasked intensities of the selected slices (all slices when `None`).
    pub fn from_volume(vol: &VoxelVolume, mask: Option<u16>, slices: Option<&[usize]>) -> Self {
        let mut hist = vec![0u64; vol.bit_depth().max_value() as usize + 1];
        let mut add = |s: &[u16]| {
            for &v in s {
                hist[v as usize] += 1;
            }
        };
        match slices {
            Some(zs) => zs.iter().for_each(|&z| add(vol.slice(z))),
            None => add(vol.data()),
        }
        let first = mask.map_or(0, |m| m as usize + 1);
        let mut out = Samples {
            values: Vec::new(),
            weights: Vec::new(),
        };
        for (v, &c) in hist.iter().enumerate().skip(first) {
            if c > 0 {
                out.values.push(v as f64);
                out.weights.push(c as f64);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Hard segmentation plus the cluster model behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub labels: LabelVolume,
    /// Ascending; label `i + 1` belongs to `centers[i]`.
    pub centers: Vec<f64>,
    pub objective: f64,
    pub iterations_used: usize,
    /// Objective after every iteration of the returned run.
    pub objective_history: Vec<f64>,
    /// Fuzzy memberships, present for FCM only.
    pub memberships: Option<MembershipTable>,
}

impl ClusterResult {
    /// Membership weights of the voxel at linear index `i` of `vol`, or
    /// `None` for masked voxels and hard clusterings.
    pub fn memberships_at(&self, vol: &VoxelVolume, i: usize) -> Option<&[f64]> {
        self.memberships.as_ref()?.of_intensity(vol.data()[i])
    }
}

/// Memberships per distinct intensity, rows aligned with label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipTable {
    pub intensities: Vec<u16>,
    pub classes: usize,
    pub weights: Vec<f64>,
}

impl MembershipTable {
    pub fn of_intensity(&self, v: u16) -> Option<&[f64]> {
        let row = self.intensities.binary_search(&v).ok()?;
        Some(&self.weights[row * self.classes..(row + 1) * self.classes])
    }
}

/// Builds a label volume from a per-intensity label lookup.
pub(crate) fn label_volume(
    vol: &VoxelVolume,
    mask: Option<u16>,
    samples: &Samples,
    sample_labels: &[u8],
    k: u8,
) -> Result<LabelVolume> {
    let lut = label_lut(samples, sample_labels, mask, vol.bit_depth().max_value());
    LabelVolume::new(
        vol.dims(),
        vol.voxel_size(),
        k,
        vol.data().iter().map(|&v| lut[v as usize]).collect(),
    )
}

fn label_lut(samples: &Samples, labels: &[u8], mask: Option<u16>, max: u16) -> Vec<u8> {
    let mut lut = vec![0u8; max as usize + 1];
    for (v, &l) in samples.values.iter().zip(labels) {
        lut[*v as usize] = l;
    }
    if let Some(m) = mask {
        lut.iter_mut().take(m as usize + 1).for_each(|l| *l = 0);
    }
    lut
}

/// Permutation that sorts centers ascending: `rank[old] = new`.
pub(crate) fn ascending_ranks(centers: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = vec![0; centers.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    (order.iter().map(|&i| centers[i]).collect(), rank)
}

pub(crate) fn check_feasible(samples: &Samples, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
    }
    if k > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "at most 255 clusters are supported, got {k}"
        )));
    }
    if samples.len() < k {
        return Err(Error::InfeasibleK(format!(
            "{k} clusters requested but only {} distinct unmasked intensities exist",
            samples.len()
        )));
    }
    Ok(())
}
