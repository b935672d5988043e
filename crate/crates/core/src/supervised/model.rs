use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{train_ensemble, EnsembleModel, EnsembleParams};
use super::features::{patch_at, FeatureMatrix, N_FEATURES};
use super::lssvm::{train_lssvm, LssvmModel, LssvmParams};
use crate::error::{Error, Result};
use crate::progress::{Monitor, Silent};
use crate::volume::{LabelVolume, VoxelVolume};

pub const MODEL_FORMAT: &str = "geoseg-model";
pub const MODEL_VERSION: u32 = 1;

/// How to train a classifier; used by cross-validation and the job runner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Trainer {
    Lssvm(LssvmParams),
    Ensemble(EnsembleParams),
}

impl Trainer {
    pub fn train(&self, f: &FeatureMatrix) -> Result<Classifier> {
        Ok(match self {
            Trainer::Lssvm(p) => Classifier::Lssvm(train_lssvm(f, p)?),
            Trainer::Ensemble(p) => Classifier::Ensemble(train_ensemble(f, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Lssvm(LssvmModel),
    Ensemble(EnsembleModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Classifier,
}

impl Classifier {
    pub fn classes(&self) -> &[u8] {
        match self {
            Classifier::Lssvm(m) => &m.classes,
            Classifier::Ensemble(m) => &m.classes,
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        match self {
            Classifier::Lssvm(m) => m.predict(x),
            Classifier::Ensemble(m) => m.predict(x),
        }
    }

    /// Fraction of rows whose prediction equals their label.
    pub fn accuracy(&self, f: &FeatureMatrix) -> f64 {
        let hits = (0..f.len()).filter(|&i| self.predict(f.row(i)) == f.labels()[i]).count();
        hits as f64 / f.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("unreadable model: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a model file (format '{}')", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Labels every voxel from its own patch, extracted exactly as for training.
pub fn classify_volume(model: &Classifier, vol: &VoxelVolume) -> Result<LabelVolume> {
    classify_volume_monitored(model, vol, &Silent)
}

pub fn classify_volume_monitored(
    model: &Classifier,
    vol: &VoxelVolume,
    monitor: &dyn Monitor,
) -> Result<LabelVolume> {
    if let Classifier::Lssvm(m) = model {
        if m.width != N_FEATURES {
            return Err(Error::Model(format!(
                "model expects {} features, volume patches have {N_FEATURES}",
                m.width
            )));
        }
    }
    let d = vol.dims();
    let k = model.classes().iter().copied().max().unwrap_or(0);
    let done = AtomicUsize::new(0);
    let slices: Vec<Vec<u8>> = (0..d.nz)
        .into_par_iter()
        .map(|z| {
            let mut out = Vec::with_capacity(d.slice_len());
            for y in 0..d.ny {
                for x in 0..d.nx {
                    out.push(model.predict(&patch_at(vol, x, y, z)));
                }
            }
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            monitor.checkpoint(n, d.nz)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    LabelVolume::new(d, vol.voxel_size(), k, slices.concat())
}
