use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::check_class;
use super::edt::squared_distance_transform;
use crate::error::{Error, Result};
use crate::filters::gaussian_blur_3d;
use crate::stats::{moments, Histogram};
use crate::volume::{Dims, LabelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdParams {
    /// Gaussian smoothing of the distance map, in voxels.
    pub sigma: f64,
    pub bins: usize,
}

impl Default for PsdParams {
    fn default() -> Self {
        PsdParams { sigma: 1.0, bins: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdResult {
    /// Equivalent spherical diameter per region, in the unit of the voxel size.
    pub diameters: Vec<f64>,
    pub region_voxels: Vec<usize>,
    pub histogram: Histogram,
    /// Number-weighted mean and sample standard deviation of the diameters.
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Splits the pore phase into watershed regions and reports the diameter of
/// the sphere with the same volume as each region.
pub fn pore_size_distribution(
    labels: &LabelVolume,
    pore_class: u8,
    voxel_size: f64,
    p: &PsdParams,
) -> Result<PsdResult> {
    check_class(labels, pore_class)?;
    if !(voxel_size > 0.0) {
        return Err(Error::InvalidParameter(format!("voxel size must be > 0, got {voxel_size}")));
    }
    let pore: Vec<bool> = labels.labels().iter().map(|&l| l == pore_class).collect();
    if !pore.iter().any(|&b| b) {
        return Err(Error::EmptyRegion(format!("no voxel carries pore class {pore_class}")));
    }
    let (regions, n) = watershed_regions(&pore, labels.dims(), p.sigma);
    let mut region_voxels = vec![0usize; n];
    for &r in &regions {
        if r > 0 {
            region_voxels[r as usize - 1] += 1;
        }
    }
    let v3 = voxel_size.powi(3);
    let diameters: Vec<f64> = region_voxels
        .iter()
        .map(|&c| 2.0 * (3.0 * c as f64 * v3 / (4.0 * std::f64::consts::PI)).cbrt())
        .collect();
    let (mean, std, _) = moments(&diameters);
    Ok(PsdResult {
        histogram: Histogram::new(&diameters, p.bins),
        count: diameters.len(),
        diameters,
        region_voxels,
        mean,
        std,
    })
}

const NEIGH6: [[isize; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

fn offsets26() -> Vec<[isize; 3]> {
    let mut v = Vec::with_capacity(26);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}

fn neighbours(d: Dims, i: usize, offsets: &[[isize; 3]]) -> impl Iterator<Item = usize> + '_ {
    let (x, y, z) = d.coords(i);
    offsets.iter().filter_map(move |&[dx, dy, dz]| {
        let (xx, yy, zz) = (x as isize + dx, y as isize + dy, z as isize + dz);
        (xx >= 0 && yy >= 0 && zz >= 0 && (xx as usize) < d.nx && (yy as usize) < d.ny && (zz as usize) < d.nz)
            .then(|| d.index(xx as usize, yy as usize, zz as usize))
    })
}

/// Marker-based watershed of the foreground on its smoothed distance map.
///
/// Markers are the 26-connected plateaus of the smoothed map that have no
/// higher foreground neighbour. Flooding proceeds through 6-neighbours from
/// the highest value down; equal values flood first-in first-out, so the
/// partition is fully determined by the input. Returns the region id of
/// every voxel (0 outside the foreground) and the number of regions.
pub fn watershed_regions(fg: &[bool], d: Dims, sigma: f64) -> (Vec<u32>, usize) {
    let cap = ((d.nx * d.nx + d.ny * d.ny + d.nz * d.nz) as f64).sqrt();
    let dist: Vec<f64> = squared_distance_transform(fg, d)
        .into_iter()
        .map(|v| if v.is_finite() { v.sqrt() } else { cap })
        .collect();
    let s = gaussian_blur_3d(&dist, d, sigma);

    let n26 = offsets26();
    let mut region = vec![0u32; d.len()];
    let mut seen = vec![false; d.len()];
    let mut n = 0u32;
    let mut plateau = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..d.len() {
        if !fg[start] || seen[start] {
            continue;
        }
        plateau.clear();
        seen[start] = true;
        queue.push_back(start);
        let mut is_max = true;
        while let Some(i) = queue.pop_front() {
            plateau.push(i);
            for j in neighbours(d, i, &n26) {
                if !fg[j] {
                    continue;
                }
                if s[j] > s[start] {
                    is_max = false;
                } else if s[j] == s[start] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if is_max {
            n += 1;
            for &i in &plateau {
                region[i] = n;
            }
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for i in 0..d.len() {
        if region[i] > 0 {
            heap.push((s[i].to_bits(), Reverse(seq), i));
            seq += 1;
        }
    }
    while let Some((_, _, i)) = heap.pop() {
        for j in neighbours(d, i, &NEIGH6) {
            if fg[j] && region[j] == 0 {
                region[j] = region[i];
                heap.push((s[j].to_bits(), Reverse(seq), j));
                seq += 1;
            }
        }
    }

    // foreground only 26-connected to a marker gets its own regions
    for start in 0..d.len() {
        if !fg[start] || region[start] != 0 {
            continue;
        }
        n += 1;
        region[start] = n;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbours(d, i, &NEIGH6) {
                if fg[j] && region[j] == 0 {
                    region[j] = n;
                    queue.push_back(j);
                }
            }
        }
    }
    (region, n as usize)
}
