use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::convolve_axis;
use crate::error::{Error, Result};
use crate::volume::{Dims, VoxelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothMethod {
    Median,
    Mean,
    /// Gaussian-weighted mean; `sigma` defaults to half the radius.
    Gaussian,
}

/// Per-slice windowed smoothing over a `(2r+1)^2` window with edge replication.
pub fn smooth(
    vol: &VoxelVolume,
    method: SmoothMethod,
    radius: usize,
    sigma: Option<f64>,
) -> Result<VoxelVolume> {
    if radius < 1 {
        return Err(Error::InvalidParameter("smoothing radius must be >= 1".into()));
    }
    let d = vol.dims();
    let slice_dims = Dims::new(d.nx, d.ny, 1);
    let out: Vec<u16> = (0..d.nz)
        .into_par_iter()
        .flat_map_iter(|z| {
            let s = vol.slice(z);
            let filtered: Vec<f64> = match method {
                SmoothMethod::Median => median_slice(s, slice_dims, radius),
                SmoothMethod::Mean => {
                    let taps = vec![1.0 / (2 * radius + 1) as f64; 2 * radius + 1];
                    separable(s, slice_dims, &taps)
                }
                SmoothMethod::Gaussian => {
                    let sigma = sigma.unwrap_or(radius as f64 / 2.0);
                    let taps = truncated_gaussian(sigma, radius);
                    separable(s, slice_dims, &taps)
                }
            };
            let bd = vol.bit_depth();
            filtered.into_iter().map(move |v| bd.quantize(v))
        })
        .collect();
    Ok(vol.with_data(out))
}

fn truncated_gaussian(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|o| {
            if sigma > 0.0 {
                (-(o * o) as f64 / (2.0 * sigma * sigma)).exp()
            } else if o == 0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn separable(s: &[u16], d: Dims, taps: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = s.iter().map(|&x| x as f64).collect();
    let v = convolve_axis(&v, d, 0, taps);
    convolve_axis(&v, d, 1, taps)
}

fn median_slice(s: &[u16], d: Dims, r: usize) -> Vec<f64> {
    let r = r as isize;
    let mut window = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    let mut out = Vec::with_capacity(s.len());
    for y in 0..d.ny as isize {
        for x in 0..d.nx as isize {
            window.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, d.ny as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, d.nx as isize - 1) as usize;
                    window.push(s[xx + d.nx * yy]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable(mid);
            out.push(*m as f64);
        }
    }
    out
}
