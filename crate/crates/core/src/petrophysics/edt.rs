use rayon::prelude::*;

use crate::volume::Dims;

/// Exact squared Euclidean distance from every `true` voxel to the nearest
/// `false` voxel, in voxel units. Space outside the grid is not background;
/// without any `false` voxel every distance is infinite.
///
/// Separable lower-envelope algorithm (one parabola pass per axis).
pub fn squared_distance_transform(fg: &[bool], d: Dims) -> Vec<f64> {
    let mut f: Vec<f64> = fg.iter().map(|&b| if b { f64::INFINITY } else { 0.0 }).collect();
    for axis in 0..3 {
        f = pass(&f, d, axis);
    }
    f
}

fn pass(f: &[f64], d: Dims, axis: usize) -> Vec<f64> {
    let (n, stride) = match axis {
        0 => (d.nx, 1),
        1 => (d.ny, d.nx),
        _ => (d.nz, d.slice_len()),
    };
    let lines: Vec<usize> = (0..d.len())
        .filter(|&i| {
            let (x, y, z) = d.coords(i);
            [x, y, z][axis] == 0
        })
        .collect();
    let results: Vec<Vec<f64>> = lines
        .par_iter()
        .map(|&start| {
            let line: Vec<f64> = (0..n).map(|k| f[start + k * stride]).collect();
            envelope(&line)
        })
        .collect();
    let mut out = vec![0.0; f.len()];
    for (&start, r) in lines.iter().zip(results) {
        for (k, v) in r.into_iter().enumerate() {
            out[start + k * stride] = v;
        }
    }
    out
}

/// `out[q] = min_p (q - p)^2 + f[p]` by the lower envelope of parabolas;
/// infinite samples contribute no parabola.
fn envelope(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    let inter = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in (0..n).filter(|&q| f[q].is_finite()) {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = inter(q, p);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return vec![f64::INFINITY; n];
    }
    z.push(f64::INFINITY);
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *o = dq * dq + f[v[k]];
    }
    out
}
