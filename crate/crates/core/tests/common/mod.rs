//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use geoseg::{BitDepth, Dims, VoxelVolume};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Minimum within-cluster sum of squares over every partition of `x` into
/// exactly `k` non-empty blocks, with one optimal assignment.
pub fn best_partition(x: &[f64], k: usize) -> (f64, Vec<usize>) {
    fn rec(x: &[f64], k: usize, assign: &mut Vec<usize>, used: usize, best: &mut (f64, Vec<usize>)) {
        let i = assign.len();
        if i == x.len() {
            if used == k {
                let mut cost = 0.0;
                for b in 0..k {
                    let members: Vec<f64> = x.iter().zip(assign.iter()).filter(|(_, &a)| a == b).map(|(&v, _)| v).collect();
                    let mean = members.iter().sum::<f64>() / members.len() as f64;
                    cost += members.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
                }
                if cost < best.0 {
                    *best = (cost, assign.clone());
                }
            }
            return;
        }
        // restricted growth strings enumerate each set partition once
        for b in 0..(used + 1).min(k) {
            if x.len() - i - 1 < k - used.max(b + 1) {
                continue;
            }
            assign.push(b);
            rec(x, k, assign, used.max(b + 1), best);
            assign.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(x, k, &mut Vec::new(), 0, &mut best);
    best
}

/// Solves `a z = r` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                r[row] -= f * r[col];
            }
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * z[c]).sum();
        z[row] = (r[row] - s) / a[row][row];
    }
    z
}

/// `|a z - r| / |r|`
pub fn relative_residual(a: &[Vec<f64>], z: &[f64], r: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(r)
        .map(|(row, ri)| {
            let v: f64 = row.iter().zip(z).map(|(x, y)| x * y).sum::<f64>() - ri;
            v * v
        })
        .sum();
    let den: f64 = r.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

/// Bordered kernel system `[0 1ᵀ; 1 K + I/γ] [b; α] = [0; y]` for one class pair,
/// rebuilt from scratch with a hand-written RBF kernel.
pub fn bordered_system(rows: &[Vec<f64>], y: &[f64], gamma: f64, sigma2: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        a[0][i + 1] = 1.0;
        a[i + 1][0] = 1.0;
        for j in 0..n {
            let d2: f64 = rows[i].iter().zip(&rows[j]).map(|(p, q)| (p - q) * (p - q)).sum();
            a[i + 1][j + 1] = (-d2 / sigma2).exp() + if i == j { 1.0 / gamma } else { 0.0 };
        }
    }
    let mut r = vec![0.0];
    r.extend_from_slice(y);
    (a, r)
}

/// Disagreement with the phantom truth `(away from grain surfaces, inside the halo band)`,
/// over unmasked voxels.
pub fn halo_errors(labels: &geoseg::LabelVolume, truth: &geoseg::LabelVolume, halo: &[bool]) -> (f64, f64) {
    let (mut bulk, mut bulk_bad, mut band, mut band_bad) = (0usize, 0usize, 0usize, 0usize);
    for ((&l, &t), &h) in labels.labels().iter().zip(truth.labels()).zip(halo) {
        if t == 0 {
            continue;
        }
        if h {
            band += 1;
            band_bad += (l != t) as usize;
        } else {
            bulk += 1;
            bulk_bad += (l != t) as usize;
        }
    }
    (bulk_bad as f64 / bulk as f64, band_bad as f64 / band as f64)
}

/// 32×32 white noise around 1000 with σ = 50.
pub fn noisy_square(seed: u64) -> VoxelVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::<f64>::new(1000.0, 50.0).unwrap();
    let data = (0..32 * 32).map(|_| noise.sample(&mut rng).round() as u16).collect();
    VoxelVolume::new(Dims::new(32, 32, 1), 1.0, BitDepth::U16, data).unwrap()
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Direct non-local means: for every voxel and every candidate in its
/// window, compare the two patches voxel by voxel.
pub fn nlm_reference(vol: &VoxelVolume, search: usize, patch: usize, h: f64, three_d: bool) -> Vec<f64> {
    let d = vol.dims();
    let (s, p) = (search as isize / 2, patch as isize / 2);
    let (sz, pz) = if three_d { (s, p) } else { (0, 0) };
    let at = |x: isize, y: isize, z: isize| {
        let c = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        vol.get(c(x, d.nx), c(y, d.ny), c(z, d.nz)) as f64
    };
    let mut out = Vec::with_capacity(d.len());
    for z in 0..d.nz as isize {
        for y in 0..d.ny as isize {
            for x in 0..d.nx as isize {
                let (mut num, mut den) = (0.0, 0.0);
                for cz in z - sz..=z + sz {
                    for cy in y - s..=y + s {
                        for cx in x - s..=x + s {
                            if cx < 0 || cy < 0 || cz < 0 || cx >= d.nx as isize || cy >= d.ny as isize || cz >= d.nz as isize {
                                continue;
                            }
                            let (mut d2, mut count) = (0.0, 0.0);
                            for oz in -pz..=pz {
                                for oy in -p..=p {
                                    for ox in -p..=p {
                                        let a = at(x + ox, y + oy, z + oz);
                                        let b = at(cx + ox, cy + oy, cz + oz);
                                        d2 += (a - b) * (a - b);
                                        count += 1.0;
                                    }
                                }
                            }
                            let w = (-(d2 / count) / (h * h)).exp();
                            num += w * at(cx, cy, cz);
                            den += w;
                        }
                    }
                }
                out.push(num / den);
            }
        }
    }
    out
}

/// Scalar explicit scheme: each face pair below the threshold exchanges
/// `(u_j - u_i) / 7` per iteration; no flux through the volume boundary.
pub fn ad_reference(vol: &VoxelVolume, threshold: f64, iterations: usize) -> Vec<f64> {
    let d = vol.dims();
    let mut u = vol.as_f64();
    for _ in 0..iterations {
        let mut next = u.clone();
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    let i = d.index(x, y, z);
                    let mut nbrs = Vec::new();
                    if x > 0 { nbrs.push(d.index(x - 1, y, z)); }
                    if x + 1 < d.nx { nbrs.push(d.index(x + 1, y, z)); }
                    if y > 0 { nbrs.push(d.index(x, y - 1, z)); }
                    if y + 1 < d.ny { nbrs.push(d.index(x, y + 1, z)); }
                    if z > 0 { nbrs.push(d.index(x, y, z - 1)); }
                    if z + 1 < d.nz { nbrs.push(d.index(x, y, z + 1)); }
                    for j in nbrs {
                        if (u[j] - u[i]).abs() < threshold {
                            next[i] += (u[j] - u[i]) / 7.0;
                        }
                    }
                }
            }
        }
        u = next;
    }
    u
}
