use serde::{Deserialize, Serialize};

use super::{check_class, porosity};
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Roi};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevOptions {
    /// Porosity tolerance around the full-volume value that counts as stable.
    pub band: f64,
    /// Shift of the cube center from the volume center, in voxels.
    pub offset: [isize; 3],
}

impl Default for RevOptions {
    fn default() -> Self {
        RevOptions {
            band: 0.01,
            offset: [0, 0, 0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevRegion {
    /// Porosity still fluctuates with sample size.
    Fluctuating,
    /// Porosity has settled within the band: representative volume reached.
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevSample {
    pub edge: usize,
    pub porosity: f64,
    pub region: RevRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevCurve {
    pub samples: Vec<RevSample>,
    pub full_porosity: f64,
    /// Smallest edge from which every larger sample stays inside the band.
    pub stable_from: Option<usize>,
}

/// Porosity of concentric cubes of growing edge length.
pub fn rev_curve(
    labels: &LabelVolume,
    pore_class: u8,
    edges: &[usize],
    opts: &RevOptions,
) -> Result<RevCurve> {
    check_class(labels, pore_class)?;
    if edges.is_empty() || edges[0] == 0 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "edge lengths must be positive and strictly increasing".into(),
        ));
    }
    let d = labels.dims();
    let center = [
        (d.nx / 2) as isize + opts.offset[0],
        (d.ny / 2) as isize + opts.offset[1],
        (d.nz / 2) as isize + opts.offset[2],
    ];
    let full_porosity = porosity(labels, pore_class)?;
    let mut samples = Vec::with_capacity(edges.len());
    for &e in edges {
        let start = center.map(|c| c - (e / 2) as isize);
        if start.iter().any(|&s| s < 0) {
            return Err(Error::OutOfBounds(format!(
                "a cube of edge {e} around {center:?} leaves the {d} volume"
            )));
        }
        let roi = Roi::new(start[0] as usize, start[1] as usize, start[2] as usize, e, e, e);
        let sub = labels.crop(&roi)?;
        let p = porosity(&sub, pore_class)
            .map_err(|_| Error::EmptyRegion(format!("the cube of edge {e} is fully masked")))?;
        samples.push(RevSample {
            edge: e,
            porosity: p,
            region: RevRegion::Fluctuating,
        });
    }
    let mut stable_from = None;
    for s in samples.iter().rev() {
        if (s.porosity - full_porosity).abs() <= opts.band {
            stable_from = Some(s.edge);
        } else {
            break;
        }
    }
    if let Some(e0) = stable_from {
        for s in samples.iter_mut().filter(|s| s.edge >= e0) {
            s.region = RevRegion::Stable;
        }
    }
    Ok(RevCurve {
        samples,
        full_porosity,
        stable_from,
    })
}
