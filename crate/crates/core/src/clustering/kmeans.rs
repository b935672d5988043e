use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ascending_ranks, check_feasible, label_volume, ClusterResult, Samples};
use crate::error::{Error, Result};
use crate::volume::VoxelVolume;

/// Distance between a scalar intensity and a center.
///
/// On scalars the Manhattan and Chebyshev metrics coincide (`|v - c|`); both
/// update centers with the weighted median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    SqEuclidean,
    Manhattan,
    Chebyshev,
}

impl Distance {
    #[inline]
    pub fn eval(self, v: f64, c: f64) -> f64 {
        match self {
            Distance::SqEuclidean => (v - c) * (v - c),
            Distance::Manhattan | Distance::Chebyshev => (v - c).abs(),
        }
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqeuclidean" | "sq_euclidean" | "euclidean" => Ok(Distance::SqEuclidean),
            "manhattan" | "cityblock" | "mandist" => Ok(Distance::Manhattan),
            "chebyshev" | "box" | "boxdist" => Ok(Distance::Chebyshev),
            "link" | "linkdist" => Err(Error::InvalidParameter(
                "link distance counts steps between neurons of a network layer and has no \
                 meaning for scalar intensities; use sqeuclidean, manhattan or chebyshev"
                    .into(),
            )),
            other => Err(Error::InvalidParameter(format!("unknown distance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `k` distinct intensities drawn at random, each voxel equally likely.
    #[default]
    RandomSample,
    /// k-means++ seeding: after a first count-weighted pick, each further
    /// center is drawn with probability proportional to count times its
    /// distance to the nearest center already chosen.
    PlusPlus,
    ProvidedCenters(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub k: usize,
    pub distance: Distance,
    pub restarts: usize,
    pub init: Init,
    pub max_iters: usize,
    /// Centers must move less than this before a stable assignment ends the run.
    pub tol: f64,
    /// Voxels at or below this intensity are labelled 0 and ignored.
    pub mask_threshold: Option<u16>,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            k: 3,
            distance: Distance::SqEuclidean,
            restarts: 5,
            init: Init::RandomSample,
            max_iters: 100,
            tol: 0.5,
            mask_threshold: Some(0),
            seed: 42,
        }
    }
}

impl KmeansConfig {
    pub fn with_k(k: usize) -> Self {
        KmeansConfig {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if let Init::ProvidedCenters(c) = &self.init {
            if c.len() != self.k {
                return Err(Error::InvalidParameter(format!(
                    "{} initial centers given for k = {}",
                    c.len(),
                    self.k
                )));
            }
        }
        Ok(())
    }
}

/// A fitted clustering of [`Samples`], centers ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub centers: Vec<f64>,
    /// 1-based label of every sample.
    pub labels: Vec<u8>,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

pub fn kmeans_fit(samples: &Samples, cfg: &KmeansConfig) -> Result<KmeansFit> {
    cfg.validate()?;
    check_feasible(samples, cfg.k)?;
    let runs: Vec<Run> = match &cfg.init {
        Init::ProvidedCenters(c) => vec![lloyd(samples, c.clone(), cfg)],
        init => (0..cfg.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                let start = if *init == Init::PlusPlus {
                    plus_plus_centers(samples, cfg.k, cfg.distance, &mut rng)
                } else {
                    sample_centers(samples, cfg.k, &mut rng)
                };
                lloyd(samples, start, cfg)
            })
            .collect(),
    };
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one run");
    let (centers, rank) = ascending_ranks(&best.centers);
    Ok(KmeansFit {
        centers,
        labels: best.assign.iter().map(|&a| rank[a] as u8 + 1).collect(),
        objective: best.objective,
        iterations: best.iterations,
        history: best.history,
    })
}

/// K-means on the unmasked intensities of `vol`.
pub fn kmeans_segment(vol: &VoxelVolume, cfg: &KmeansConfig) -> Result<ClusterResult> {
    let samples = Samples::from_volume(vol, cfg.mask_threshold, None);
    let fit = kmeans_fit(&samples, cfg)?;
    let labels = label_volume(vol, cfg.mask_threshold, &samples, &fit.labels, cfg.k as u8)?;
    Ok(ClusterResult {
        labels,
        centers: fit.centers,
        objective: fit.objective,
        iterations_used: fit.iterations,
        objective_history: fit.history,
        memberships: None,
    })
}

/// Index drawn with probability proportional to `weights`.
fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut pick = weights.iter().rposition(|&w| w > 0.0).expect("feasible k");
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 && target < w {
            pick = i;
            break;
        }
        target -= w;
    }
    pick
}

/// Draws `k` distinct sample values, each pick proportional to voxel count.
pub(crate) fn sample_centers(samples: &Samples, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut weights = samples.weights.clone();
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let pick = weighted_pick(&weights, rng);
        centers.push(samples.values[pick]);
        weights[pick] = 0.0;
    }
    centers
}

fn plus_plus_centers(samples: &Samples, k: usize, dist: Distance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let first = samples.values[weighted_pick(&samples.weights, rng)];
    let mut nearest: Vec<f64> = samples.values.iter().map(|&v| dist.eval(v, first)).collect();
    let mut centers = vec![first];
    while centers.len() < k {
        let w: Vec<f64> = samples.weights.iter().zip(&nearest).map(|(w, d)| w * d).collect();
        let c = samples.values[weighted_pick(&w, rng)];
        for (n, &v) in nearest.iter_mut().zip(&samples.values) {
            *n = n.min(dist.eval(v, c));
        }
        centers.push(c);
    }
    centers
}

struct Run {
    centers: Vec<f64>,
    assign: Vec<usize>,
    objective: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn assign_all(samples: &Samples, centers: &[f64], dist: Distance) -> Vec<usize> {
    samples
        .values
        .iter()
        .map(|&v| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centers.iter().enumerate() {
                let d = dist.eval(v, c);
                // strict comparison: the lower index wins ties
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn objective(samples: &Samples, centers: &[f64], assign: &[usize], dist: Distance) -> f64 {
    samples
        .values
        .iter()
        .zip(&samples.weights)
        .zip(assign)
        .map(|((&v, &w), &a)| w * dist.eval(v, centers[a]))
        .sum()
}

fn weighted_median(pairs: &[(f64, f64)]) -> f64 {
    // pairs arrive in ascending value order
    let half = pairs.iter().map(|p| p.1).sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for &(v, w) in pairs {
        acc += w;
        if acc >= half {
            return v;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

fn update_centers(samples: &Samples, centers: &mut [f64], assign: &[usize], dist: Distance) {
    let k = centers.len();
    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); k];
    for ((&v, &w), &a) in samples.values.iter().zip(&samples.weights).zip(assign) {
        members[a].push((v, w));
    }
    let mut empty = Vec::new();
    for (j, m) in members.iter().enumerate() {
        if m.is_empty() {
            empty.push(j);
            continue;
        }
        centers[j] = match dist {
            Distance::SqEuclidean => {
                let (s, w) = m.iter().fold((0.0, 0.0), |(s, tw), &(v, w)| (s + v * w, tw + w));
                s / w
            }
            Distance::Manhattan | Distance::Chebyshev => weighted_median(m),
        };
    }
    if empty.is_empty() {
        return;
    }
    // reseed every empty cluster with the sample farthest from its own center
    let mut taken = vec![false; samples.len()];
    for j in empty {
        let mut far = None;
        let mut far_d = -1.0;
        for (i, (&v, &a)) in samples.values.iter().zip(assign).enumerate() {
            let d = dist.eval(v, centers[a]);
            if !taken[i] && d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            taken[i] = true;
            centers[j] = samples.values[i];
        }
    }
}

fn lloyd(samples: &Samples, mut centers: Vec<f64>, cfg: &KmeansConfig) -> Run {
    let dist = cfg.distance;
    let mut assign = assign_all(samples, &centers, dist);
    let mut history = vec![objective(samples, &centers, &assign, dist)];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let before = centers.clone();
        update_centers(samples, &mut centers, &assign, dist);
        let moved = centers
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let next = assign_all(samples, &centers, dist);
        let stable = next == assign;
        assign = next;
        history.push(objective(samples, &centers, &assign, dist));
        if stable && moved < cfg.tol {
            break;
        }
    }
    Run {
        objective: *history.last().unwrap(),
        centers,
        assign,
        iterations,
        history,
    }
}
