use rayon::prelude::*;

use crate::volume::Dims;

/// Normalized 1D Gaussian taps, truncated at `ceil(3 sigma)`.
pub(crate) fn kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Convolves along one axis with edge replication.
pub(crate) fn convolve_axis(values: &[f64], dims: Dims, axis: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let (n, stride) = match axis {
        0 => (dims.nx, 1),
        1 => (dims.ny, dims.nx),
        _ => (dims.nz, dims.slice_len()),
    };
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(dims.slice_len())
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    let i = dims.index(x, y, z);
                    let pos = [x, y, z][axis] as isize;
                    let base = i as isize - pos * stride as isize;
                    let mut acc = 0.0;
                    for (t, w) in taps.iter().enumerate() {
                        let p = (pos + t as isize - r).clamp(0, n as isize - 1);
                        acc += w * values[(base + p * stride as isize) as usize];
                    }
                    slab[i - z * dims.slice_len()] = acc;
                }
            }
        });
    out
}

/// Separable 3D Gaussian blur with edge replication. `sigma <= 0` is a no-op.
pub fn gaussian_blur_3d(values: &[f64], dims: Dims, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let taps = kernel(sigma);
    let mut v = convolve_axis(values, dims, 0, &taps);
    v = convolve_axis(&v, dims, 1, &taps);
    if dims.nz > 1 {
        v = convolve_axis(&v, dims, 2, &taps);
    }
    v
}
