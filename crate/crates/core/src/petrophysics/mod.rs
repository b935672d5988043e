//! Porosity, phase fractions, pore-size distributions and representative
//! elementary volume sweeps on label volumes.
//!
//! All ratios are taken over unmasked voxels (label != 0). "Relative
//! porosity" of a slice is its pore count divided by its unmasked count.

mod edt;
mod psd;
mod rev;

pub use edt::squared_distance_transform;
pub use psd::{pore_size_distribution, watershed_regions, PsdParams, PsdResult};
pub use rev::{rev_curve, RevCurve, RevOptions, RevRegion, RevSample};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

pub(crate) fn check_class(labels: &LabelVolume, class: u8) -> Result<()> {
    if class == 0 || class > labels.k() {
        return Err(Error::InvalidParameter(format!(
            "pore class must lie in 1..={}, got {class}",
            labels.k()
        )));
    }
    Ok(())
}

fn ratio(labels: &[u8], class: u8) -> Option<f64> {
    let (mut hit, mut unmasked) = (0usize, 0usize);
    for &l in labels {
        unmasked += (l != 0) as usize;
        hit += (l == class) as usize;
    }
    (unmasked > 0).then(|| hit as f64 / unmasked as f64)
}

/// Pore voxels over unmasked voxels.
pub fn porosity(labels: &LabelVolume, pore_class: u8) -> Result<f64> {
    check_class(labels, pore_class)?;
    ratio(labels.labels(), pore_class)
        .ok_or_else(|| Error::EmptyRegion("every voxel is masked".into()))
}

/// Fraction of the unmasked voxels in each class `1..=k`.
pub fn volume_fractions(labels: &LabelVolume) -> Result<BTreeMap<u8, f64>> {
    let counts = labels.counts();
    let total: usize = counts[1..].iter().sum();
    if total == 0 {
        return Err(Error::EmptyRegion("every voxel is masked".into()));
    }
    Ok((1..=labels.k())
        .map(|c| (c, counts[c as usize] as f64 / total as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityTrend {
    pub porosities: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the fit; 0 when porosity is constant.
    pub r_squared: f64,
    pub mean: f64,
    /// Sample standard deviation over slices.
    pub std: f64,
}

/// Per-slice porosity and its least-squares line against slice index.
pub fn porosity_trend(labels: &LabelVolume, pore_class: u8) -> Result<PorosityTrend> {
    check_class(labels, pore_class)?;
    let nz = labels.dims().nz;
    if nz < 2 {
        return Err(Error::InvalidParameter("a porosity trend needs at least two slices".into()));
    }
    let porosities = (0..nz)
        .map(|z| {
            ratio(labels.slice(z), pore_class)
                .ok_or_else(|| Error::EmptyRegion(format!("slice {z} is fully masked")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (slope, intercept, r_squared) = linear_fit(&porosities);
    let n = nz as f64;
    let mean = porosities.iter().sum::<f64>() / n;
    let var = porosities.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    Ok(PorosityTrend {
        porosities,
        slope,
        intercept,
        r_squared,
        mean,
        std: var.sqrt(),
    })
}

/// Ordinary least squares of `y` against its index: `(slope, intercept, r²)`.
pub fn linear_fit(y: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
        syy += (v - my) * (v - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    if syy == 0.0 {
        return (slope, intercept, 0.0);
    }
    let ss_res: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let e = v - (intercept + slope * i as f64);
            e * e
        })
        .sum();
    (slope, intercept, (1.0 - ss_res / syy).clamp(0.0, 1.0))
}
