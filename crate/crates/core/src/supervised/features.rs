use serde::{Deserialize, Serialize};

use super::table::TrainingTable;
use crate::error::{Error, Result};
use crate::volume::VoxelVolume;

pub const PATCH_SIDE: usize = 6;
pub const N_FEATURES: usize = PATCH_SIDE * PATCH_SIDE;
/// Position of the labelled pixel inside its patch, along both axes.
pub const PATCH_ANCHOR: usize = 2;

/// The 6×6 in-slice patch whose top-left corner is `(x - 2, y - 2)`,
/// flattened row by row. Out-of-slice reads replicate the nearest edge.
pub fn patch_at(vol: &VoxelVolume, x: usize, y: usize, z: usize) -> [f64; N_FEATURES] {
    let d = vol.dims();
    let s = vol.slice(z);
    let mut out = [0.0; N_FEATURES];
    for dy in 0..PATCH_SIDE {
        let yy = (y + dy).saturating_sub(PATCH_ANCHOR).min(d.ny - 1);
        for dx in 0..PATCH_SIDE {
            let xx = (x + dx).saturating_sub(PATCH_ANCHOR).min(d.nx - 1);
            out[dy * PATCH_SIDE + dx] = s[xx + d.nx * yy] as f64;
        }
    }
    out
}

/// Samples as rows of equal width with one class id each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    width: usize,
    data: Vec<f64>,
    labels: Vec<u8>,
    /// Source voxel `(x, y, slice)` of each row, when extracted from a volume.
    pub provenance: Vec<(usize, usize, usize)>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let width = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidParameter(format!(
                "row {i} has {} features, expected {width}",
                rows[i].len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l == 0) {
            return Err(Error::InvalidParameter(format!("row {i}: class 0 is reserved")));
        }
        Ok(FeatureMatrix {
            width,
            data: rows.concat(),
            labels,
            provenance: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Distinct classes, ascending.
    pub fn classes(&self) -> Vec<u8> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            width: self.width,
            data: idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: if self.provenance.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.provenance[i]).collect()
            },
        }
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<FeatureMatrix> {
        if labels.len() != self.len() {
            return Err(Error::InvalidParameter("label count differs from row count".into()));
        }
        Ok(FeatureMatrix {
            labels,
            ..self.clone()
        })
    }
}

/// One 36-value patch vector per table row.
pub fn extract_features(vol: &VoxelVolume, table: &TrainingTable) -> Result<FeatureMatrix> {
    table.validate(vol.dims())?;
    if table.rows.is_empty() {
        return Err(Error::InvalidParameter("training table is empty".into()));
    }
    let mut data = Vec::with_capacity(table.rows.len() * N_FEATURES);
    for r in &table.rows {
        data.extend_from_slice(&patch_at(vol, r.x, r.y, r.slice));
    }
    Ok(FeatureMatrix {
        width: N_FEATURES,
        data,
        labels: table.rows.iter().map(|r| r.class_id).collect(),
        provenance: table.rows.iter().map(|r| (r.x, r.y, r.slice)).collect(),
    })
}
