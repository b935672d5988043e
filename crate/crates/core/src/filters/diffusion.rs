//! Threshold-gated anisotropic diffusion on the 6-neighbourhood.
//!
//! Every face-neighbour pair exchanges flux `STEP_WEIGHT * (u_n - u)` when
//! their difference is below the stop threshold and nothing otherwise.
//! Boundary faces carry no flux, so the scheme conserves the total intensity
//! and, with a step weight below 1/6, every update is a convex combination of
//! the previous values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::gaussian_blur_3d;
use crate::error::{Error, Result};
use crate::progress::{Monitor, Silent};
use crate::volume::{Dims, VoxelVolume};

/// Explicit-scheme step weight per neighbour pair.
pub const STEP_WEIGHT: f64 = 1.0 / 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdParams {
    /// Neighbour difference (intensity units) at or above which no diffusion happens.
    pub threshold: f64,
    pub iterations: usize,
    /// Gaussian width (voxels) of the copy used to evaluate the stop criterion.
    /// Zero gates on the raw differences.
    pub smoothing_sigma: f64,
}

impl Default for AdParams {
    fn default() -> Self {
        AdParams {
            threshold: 22_968.0,
            iterations: 5,
            smoothing_sigma: 0.0,
        }
    }
}

impl AdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter(
                "diffusion needs at least one iteration".into(),
            ));
        }
        if !(self.smoothing_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing sigma must be >= 0, got {}",
                self.smoothing_sigma
            )));
        }
        Ok(())
    }
}

pub fn anisotropic_diffusion(vol: &VoxelVolume, p: &AdParams) -> Result<VoxelVolume> {
    anisotropic_diffusion_monitored(vol, p, &Silent)
}

pub fn anisotropic_diffusion_monitored(
    vol: &VoxelVolume,
    p: &AdParams,
    monitor: &dyn Monitor,
) -> Result<VoxelVolume> {
    let field = run(vol.as_f64(), vol.dims(), p, monitor)?;
    Ok(vol.quantized(&field))
}

/// Unrounded diffusion result.
pub fn anisotropic_diffusion_field(vol: &VoxelVolume, p: &AdParams) -> Result<Vec<f64>> {
    run(vol.as_f64(), vol.dims(), p, &Silent)
}

fn run(mut u: Vec<f64>, dims: Dims, p: &AdParams, monitor: &dyn Monitor) -> Result<Vec<f64>> {
    p.validate()?;
    for it in 0..p.iterations {
        let gate_src = if p.smoothing_sigma > 0.0 {
            Some(gaussian_blur_3d(&u, dims, p.smoothing_sigma))
        } else {
            None
        };
        let gate = gate_src.as_deref().unwrap_or(&u);
        u = step(&u, gate, dims, p.threshold);
        monitor.checkpoint(it + 1, p.iterations)?;
    }
    Ok(u)
}

fn step(u: &[f64], gate: &[f64], dims: Dims, threshold: f64) -> Vec<f64> {
    let mut next = vec![0.0; u.len()];
    let plane = dims.slice_len();
    next.par_chunks_mut(plane).enumerate().for_each(|(z, out)| {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let i = dims.index(x, y, z);
                let mut flux = 0.0;
                let mut visit = |j: usize| {
                    if (gate[j] - gate[i]).abs() < threshold {
                        flux += u[j] - u[i];
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < dims.nx {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - dims.nx);
                }
                if y + 1 < dims.ny {
                    visit(i + dims.nx);
                }
                if z > 0 {
                    visit(i - plane);
                }
                if z + 1 < dims.nz {
                    visit(i + plane);
                }
                out[i - z * plane] = u[i] + STEP_WEIGHT * flux;
            }
        }
    });
    next
}
