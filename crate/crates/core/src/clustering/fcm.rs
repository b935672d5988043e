use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::sample_centers;
use super::{ascending_ranks, check_feasible, label_volume, ClusterResult, MembershipTable, Samples};
use crate::error::{Error, Result};
use crate::volume::VoxelVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcmConfig {
    pub c: usize,
    /// Membership exponent (fuzzifier), restricted to `(1, 2]`.
    pub m: f64,
    pub max_iters: usize,
    /// Stop once the objective changes by less than `tol` relative to its value.
    pub tol: f64,
    pub mask_threshold: Option<u16>,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig {
            c: 3,
            m: 2.0,
            max_iters: 300,
            tol: 1e-9,
            mask_threshold: Some(0),
            seed: 42,
        }
    }
}

impl FcmConfig {
    pub fn with_c(c: usize, m: f64) -> Self {
        FcmConfig {
            c,
            m,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 1.0 && self.m <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "membership exponent must lie in (1, 2], got {}",
                self.m
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Fitted fuzzy partition of [`Samples`], classes ordered by ascending center.
#[derive(Debug, Clone, PartialEq)]
pub struct FcmFit {
    pub centers: Vec<f64>,
    /// Row-major `samples × c` membership matrix.
    pub memberships: Vec<f64>,
    /// Argmax membership per sample, 1-based.
    pub labels: Vec<u8>,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Memberships of one value against all centers. Computed in the log domain
/// from `u_j ∝ d_j^(-2/(m-1))`; a zero distance yields a one-hot row.
fn membership_row(v: f64, centers: &[f64], m: f64, out: &mut [f64]) {
    if let Some(hit) = centers.iter().position(|&c| c == v) {
        out.iter_mut().for_each(|u| *u = 0.0);
        out[hit] = 1.0;
        return;
    }
    let p = -2.0 / (m - 1.0);
    for (u, &c) in out.iter_mut().zip(centers) {
        *u = p * (v - c).abs().ln();
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for u in out.iter_mut() {
        *u = (*u - top).exp();
        sum += *u;
    }
    out.iter_mut().for_each(|u| *u /= sum);
}

fn update_memberships(samples: &Samples, centers: &[f64], m: f64, u: &mut [f64]) {
    let c = centers.len();
    for (i, &v) in samples.values.iter().enumerate() {
        membership_row(v, centers, m, &mut u[i * c..(i + 1) * c]);
    }
}

fn objective(samples: &Samples, centers: &[f64], m: f64, u: &[f64]) -> f64 {
    let c = centers.len();
    let mut j = 0.0;
    for (i, (&v, &w)) in samples.values.iter().zip(&samples.weights).enumerate() {
        for (k, &ck) in centers.iter().enumerate() {
            j += w * u[i * c + k].powf(m) * (v - ck) * (v - ck);
        }
    }
    j
}

pub fn fcm_fit(samples: &Samples, cfg: &FcmConfig) -> Result<FcmFit> {
    cfg.validate()?;
    check_feasible(samples, cfg.c)?;
    let c = cfg.c;
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers = sample_centers(samples, c, &mut rng);
    let mut u = vec![0.0; n * c];
    update_memberships(samples, &centers, cfg.m, &mut u);
    let mut history = vec![objective(samples, &centers, cfg.m, &u)];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        for (k, center) in centers.iter_mut().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, (&v, &w)) in samples.values.iter().zip(&samples.weights).enumerate() {
                let um = w * u[i * c + k].powf(cfg.m);
                num += um * v;
                den += um;
            }
            if den > 0.0 {
                *center = num / den;
            }
        }
        update_memberships(samples, &centers, cfg.m, &mut u);
        let j = objective(samples, &centers, cfg.m, &u);
        let prev = *history.last().unwrap();
        history.push(j);
        if (prev - j).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let (sorted, rank) = ascending_ranks(&centers);
    let mut reordered = vec![0.0; n * c];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row = &u[i * c..(i + 1) * c];
        for (k, &val) in row.iter().enumerate() {
            reordered[i * c + rank[k]] = val;
        }
        let new_row = &reordered[i * c..(i + 1) * c];
        let mut best = 0;
        for k in 1..c {
            if new_row[k] > new_row[best] {
                best = k;
            }
        }
        labels.push(best as u8 + 1);
    }
    Ok(FcmFit {
        centers: sorted,
        memberships: reordered,
        labels,
        objective: *history.last().unwrap(),
        iterations,
        history,
    })
}

/// Fuzzy c-means on the unmasked intensities of `vol`.
pub fn fcm_segment(vol: &VoxelVolume, cfg: &FcmConfig) -> Result<ClusterResult> {
    let samples = Samples::from_volume(vol, cfg.mask_threshold, None);
    let fit = fcm_fit(&samples, cfg)?;
    let labels = label_volume(vol, cfg.mask_threshold, &samples, &fit.labels, cfg.c as u8)?;
    let table = MembershipTable {
        intensities: samples.values.iter().map(|&v| v as u16).collect(),
        classes: cfg.c,
        weights: fit.memberships,
    };
    Ok(ClusterResult {
        labels,
        centers: fit.centers,
        objective: fit.objective,
        iterations_used: fit.iterations,
        objective_history: fit.history,
        memberships: Some(table),
    })
}
