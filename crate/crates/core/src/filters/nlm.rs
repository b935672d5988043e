//! Windowed non-local means.
//!
//! Each output voxel is the weighted mean of the candidates inside its search
//! window, with weights `exp(-d2 / h^2)` where `d2` is the mean squared
//! difference between the two surrounding patches and
//! `h = similarity * sigma_noise`. Patches read outside the volume replicate
//! the nearest edge voxel; candidates are restricted to the volume, so small
//! volumes simply see a clipped search window.
//!
//! The implementation loops over search offsets rather than voxels: for one
//! offset, the patch distances of every voxel are box sums of a single
//! squared-difference image, which makes the cost independent of patch size.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::progress::{Monitor, Silent};
use crate::volume::{Dims, VoxelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlmParams {
    /// Side of the (cubic or square) search region, odd.
    pub search_window: usize,
    /// Patch side. Even values are rounded up to the next odd side so that
    /// patches stay centered, e.g. 6 becomes 7.
    pub neighborhood: usize,
    /// Multiplier applied to the estimated noise level to obtain `h`.
    pub similarity: f64,
    /// Volumetric search and patches; otherwise each slice is filtered alone.
    pub three_d: bool,
}

impl Default for NlmParams {
    fn default() -> Self {
        NlmParams {
            search_window: 21,
            neighborhood: 6,
            similarity: 0.71,
            three_d: true,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<()> {
        if self.search_window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "NLM search window must be odd, got {}",
                self.search_window
            )));
        }
        if self.neighborhood < 1 || self.search_window < self.neighborhood {
            return Err(Error::InvalidParameter(format!(
                "NLM needs search_window >= neighborhood >= 1, got {} and {}",
                self.search_window, self.neighborhood
            )));
        }
        if !(self.similarity > 0.0 && self.similarity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "NLM similarity must be positive, got {}",
                self.similarity
            )));
        }
        Ok(())
    }

    /// Odd patch side actually used.
    pub fn patch_side(&self) -> usize {
        self.neighborhood | 1
    }

    fn radii(&self) -> ([usize; 3], [usize; 3]) {
        let s = self.search_window / 2;
        let p = self.patch_side() / 2;
        if self.three_d {
            ([s, s, s], [p, p, p])
        } else {
            ([s, s, 0], [p, p, 0])
        }
    }
}

/// Robust estimate of additive white-noise standard deviation.
///
/// Uses the median absolute difference of horizontally adjacent voxels,
/// scaled for a Gaussian. Falls back to the RMS difference when more than
/// half of the neighbour pairs are identical.
pub fn estimate_noise_sigma(vol: &VoxelVolume) -> f64 {
    let d = vol.dims();
    let mut diffs = Vec::with_capacity(d.len());
    for row in vol.data().chunks_exact(d.nx) {
        for w in row.windows(2) {
            diffs.push((w[1] as f64 - w[0] as f64).abs());
        }
    }
    if diffs.is_empty() {
        return 0.0;
    }
    let mid = diffs.len() / 2;
    let (_, median, _) = diffs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let median = *median;
    if median > 0.0 {
        1.4826 * median / std::f64::consts::SQRT_2
    } else {
        let ms = diffs.iter().map(|v| v * v).sum::<f64>() / diffs.len() as f64;
        (ms / 2.0).sqrt()
    }
}

pub fn nlm_filter(vol: &VoxelVolume, p: &NlmParams) -> Result<VoxelVolume> {
    nlm_filter_monitored(vol, p, &Silent)
}

pub fn nlm_filter_monitored(
    vol: &VoxelVolume,
    p: &NlmParams,
    monitor: &dyn Monitor,
) -> Result<VoxelVolume> {
    p.validate()?;
    let h = p.similarity * estimate_noise_sigma(vol);
    let field = denoise(vol, p, h, monitor)?;
    Ok(vol.quantized(&field))
}

/// Unrounded NLM output for an explicit filtering strength `h`.
pub fn nlm_denoise_field(vol: &VoxelVolume, p: &NlmParams, h: f64) -> Result<Vec<f64>> {
    p.validate()?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("NLM h must be >= 0, got {h}")));
    }
    denoise(vol, p, h, &Silent)
}

fn denoise(vol: &VoxelVolume, p: &NlmParams, h: f64, monitor: &dyn Monitor) -> Result<Vec<f64>> {
    let input = vol.as_f64();
    if h == 0.0 {
        return Ok(input);
    }
    let dims = vol.dims();
    let (search, patch) = p.radii();
    let chunk_z = if p.three_d { 4 } else { 1 };
    let chunks: Vec<(usize, usize)> = (0..dims.nz)
        .step_by(chunk_z)
        .map(|z0| (z0, (z0 + chunk_z).min(dims.nz)))
        .collect();
    let done = AtomicUsize::new(0);
    let inv_h2 = 1.0 / (h * h);
    let parts: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(z0, z1)| {
            let out = denoise_chunk(&input, dims, z0, z1, search, patch, inv_h2);
            let n = done.fetch_add(z1 - z0, Ordering::Relaxed) + (z1 - z0);
            monitor.checkpoint(n, dims.nz)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// A box of samples with clamped (edge-replicated) reads around the volume.
struct Padded {
    origin: [isize; 3],
    ext: [usize; 3],
    data: Vec<f64>,
}

impl Padded {
    fn new(input: &[f64], dims: Dims, origin: [isize; 3], ext: [usize; 3]) -> Self {
        let mut data = Vec::with_capacity(ext[0] * ext[1] * ext[2]);
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        for k in 0..ext[2] {
            let z = clamp(origin[2] + k as isize, dims.nz);
            for j in 0..ext[1] {
                let y = clamp(origin[1] + j as isize, dims.ny);
                for i in 0..ext[0] {
                    let x = clamp(origin[0] + i as isize, dims.nx);
                    data.push(input[dims.index(x, y, z)]);
                }
            }
        }
        Padded { origin, ext, data }
    }

    #[inline]
    fn at(&self, x: isize, y: isize, z: isize) -> f64 {
        let i = (x - self.origin[0]) as usize;
        let j = (y - self.origin[1]) as usize;
        let k = (z - self.origin[2]) as usize;
        self.data[i + self.ext[0] * (j + self.ext[1] * k)]
    }
}

/// In-place running box sum of radius `r` along one axis; the result is
/// stored at the window start, so valid entries shrink by `2r` along it.
fn box_sum_axis(buf: &mut [f64], ext: [usize; 3], axis: usize, r: usize) {
    if r == 0 {
        return;
    }
    let w = 2 * r + 1;
    let stride = [1, ext[0], ext[0] * ext[1]][axis];
    let n = ext[axis];
    let mut line = vec![0.0; n];
    let plane = ext[0] * ext[1];
    let starts: Box<dyn Iterator<Item = usize>> = match axis {
        0 => Box::new((0..ext[1] * ext[2]).map(|jk| jk * ext[0])),
        1 => Box::new((0..ext[2]).flat_map(move |k| (0..ext[0]).map(move |i| i + plane * k))),
        _ => Box::new(0..plane),
    };
    for start in starts {
        for (t, slot) in line.iter_mut().enumerate() {
            *slot = buf[start + t * stride];
        }
        let mut acc: f64 = line[..w].iter().sum();
        buf[start] = acc;
        for t in 1..=n - w {
            acc += line[t + w - 1] - line[t - 1];
            buf[start + t * stride] = acc;
        }
    }
}

fn denoise_chunk(
    input: &[f64],
    dims: Dims,
    z0: usize,
    z1: usize,
    search: [usize; 3],
    patch: [usize; 3],
    inv_h2: f64,
) -> Vec<f64> {
    let pad: [usize; 3] = std::array::from_fn(|a| search[a] + patch[a]);
    let out_ext = [dims.nx, dims.ny, z1 - z0];
    let block = Padded::new(
        input,
        dims,
        [-(pad[0] as isize), -(pad[1] as isize), z0 as isize - pad[2] as isize],
        [dims.nx + 2 * pad[0], dims.ny + 2 * pad[1], out_ext[2] + 2 * pad[2]],
    );
    // region whose squared differences feed the patch sums of the output
    let reg_origin = [-(patch[0] as isize), -(patch[1] as isize), z0 as isize - patch[2] as isize];
    let reg_ext: [usize; 3] = std::array::from_fn(|a| out_ext[a] + 2 * patch[a]);
    let patch_count = (0..3).map(|a| 2 * patch[a] + 1).product::<usize>() as f64;

    let n_out = out_ext[0] * out_ext[1] * out_ext[2];
    let mut num = vec![0.0; n_out];
    let mut den = vec![0.0; n_out];
    let mut diff = vec![0.0; reg_ext[0] * reg_ext[1] * reg_ext[2]];

    let span = |r: usize, n: usize| -(r.min(n - 1) as isize)..=(r.min(n - 1) as isize);
    for oz in span(search[2], dims.nz) {
        for oy in span(search[1], dims.ny) {
            for ox in span(search[0], dims.nx) {
                let mut i = 0;
                for k in 0..reg_ext[2] as isize {
                    let z = reg_origin[2] + k;
                    for j in 0..reg_ext[1] as isize {
                        let y = reg_origin[1] + j;
                        for ii in 0..reg_ext[0] as isize {
                            let x = reg_origin[0] + ii;
                            let d = block.at(x, y, z) - block.at(x + ox, y + oy, z + oz);
                            diff[i] = d * d;
                            i += 1;
                        }
                    }
                }
                for axis in 0..3 {
                    box_sum_axis(&mut diff, reg_ext, axis, patch[axis]);
                }
                for k in 0..out_ext[2] {
                    let qz = (z0 + k) as isize + oz;
                    if qz < 0 || qz >= dims.nz as isize {
                        continue;
                    }
                    for j in 0..out_ext[1] {
                        let qy = j as isize + oy;
                        if qy < 0 || qy >= dims.ny as isize {
                            continue;
                        }
                        for ii in 0..out_ext[0] {
                            let qx = ii as isize + ox;
                            if qx < 0 || qx >= dims.nx as isize {
                                continue;
                            }
                            let ssd = diff[ii + reg_ext[0] * (j + reg_ext[1] * k)];
                            let w = (-(ssd / patch_count) * inv_h2).exp();
                            let o = ii + out_ext[0] * (j + out_ext[1] * k);
                            num[o] += w * input[dims.index(qx as usize, qy as usize, qz as usize)];
                            den[o] += w;
                        }
                    }
                }
            }
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}
