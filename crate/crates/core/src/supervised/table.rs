use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Dims;

/// One hand-picked training pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRow {
    #[serde(rename = "class")]
    pub class_id: u8,
    /// Free-text phase name such as pore, matrix, mineral or noise.
    pub feature: String,
    pub x: usize,
    pub y: usize,
    pub slice: usize,
}

/// Labelled pixel coordinates, serialised as CSV `class,feature,x,y,slice`
/// or as a JSON object `{"rows": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTable {
    pub rows: Vec<TrainingRow>,
}

impl TrainingTable {
    pub fn new(rows: Vec<TrainingRow>) -> Self {
        TrainingTable { rows }
    }

    pub fn push(&mut self, class_id: u8, feature: &str, x: usize, y: usize, slice: usize) {
        self.rows.push(TrainingRow {
            class_id,
            feature: feature.to_string(),
            x,
            y,
            slice,
        });
    }

    /// Distinct class ids, ascending.
    pub fn classes(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.rows.iter().map(|r| r.class_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Checks every row against the volume geometry; errors name the first bad row.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.class_id == 0 {
                return Err(Error::Coordinate(format!(
                    "row {i}: class 0 is reserved for masked voxels"
                )));
            }
            if r.x >= dims.nx || r.y >= dims.ny || r.slice >= dims.nz {
                return Err(Error::Coordinate(format!(
                    "row {i}: ({}, {}, slice {}) lies outside the {dims} volume",
                    r.x, r.y, r.slice
                )));
            }
        }
        Ok(())
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize().enumerate() {
            rows.push(rec.map_err(|e| Error::Coordinate(format!("row {i}: {e}")))?);
        }
        Ok(TrainingTable { rows })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["class", "feature", "x", "y", "slice"]).expect("in-memory write");
        }
        for r in &self.rows {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}
