//! Phantom volumes with exactly known ground truth, for tests, examples and
//! parameter studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BitDepth, Dims, LabelVolume, VoxelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Sphere { center, radius }
    }

    /// Distance from the sphere center to the center of voxel `(x, y, z)`.
    #[inline]
    pub fn center_distance(&self, x: usize, y: usize, z: usize) -> f64 {
        let dx = x as f64 - self.center[0];
        let dy = y as f64 - self.center[1];
        let dz = z as f64 - self.center[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// A voxel belongs to the sphere when its center lies within the radius.
    #[inline]
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        self.center_distance(x, y, z) <= self.radius
    }

    /// Voxels of the digitised sphere, clipped to the grid.
    pub fn voxel_count(&self, dims: Dims) -> usize {
        let mut n = 0;
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    n += self.contains(x, y, z) as usize;
                }
            }
        }
        n
    }
}

/// Places `count` spheres with radii in `[r_min, r_max]`, fully inside the
/// grid and at least `gap` voxels apart. Fails when the spheres do not fit.
pub fn random_spheres(
    dims: Dims,
    count: usize,
    r_min: f64,
    r_max: f64,
    gap: f64,
    seed: u64,
) -> Result<Vec<Sphere>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    place_spheres(&mut out, dims, count, (r_min, r_max), gap, true, &mut rng)?;
    Ok(out)
}

/// Adds `count` spheres to `placed`, keeping `gap` voxels from every sphere
/// already present.
fn place_spheres(
    placed: &mut Vec<Sphere>,
    dims: Dims,
    count: usize,
    (r_min, r_max): (f64, f64),
    gap: f64,
    contained: bool,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::InvalidParameter(format!("bad radius range [{r_min}, {r_max}]")));
    }
    let target = placed.len() + count;
    let mut attempts = 0;
    while placed.len() < target {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::InvalidParameter(format!(
                "could not place {count} non-overlapping spheres in {dims}"
            )));
        }
        let r = rng.random_range(r_min..=r_max);
        let mut c = [0.0; 3];
        let mut fits = true;
        for (a, n) in [dims.nx, dims.ny, dims.nz].into_iter().enumerate() {
            let (lo, hi) = if contained { (r + 1.0, n as f64 - 2.0 - r) } else { (0.0, n as f64 - 1.0) };
            if hi < lo {
                fits = false;
                break;
            }
            c[a] = rng.random_range(lo..=hi);
        }
        if !fits {
            continue;
        }
        let clear = placed.iter().all(|o| {
            let d: f64 = (0..3).map(|a| (o.center[a] - c[a]).powi(2)).sum::<f64>().sqrt();
            d >= o.radius + r + gap
        });
        if clear {
            placed.push(Sphere::new(c, r));
        }
    }
    Ok(())
}

/// Two-phase label volume: voxels inside any sphere get `inside`, all others `outside`.
pub fn sphere_labels(dims: Dims, spheres: &[Sphere], inside: u8, outside: u8) -> Result<LabelVolume> {
    let labels: Vec<u8> = (0..dims.nz)
        .into_par_iter()
        .flat_map_iter(|z| {
            (0..dims.slice_len()).map(move |i| {
                let (x, y) = (i % dims.nx, i / dims.nx);
                if spheres.iter().any(|s| s.contains(x, y, z)) {
                    inside
                } else {
                    outside
                }
            })
        })
        .collect();
    LabelVolume::new(dims, 1.0, inside.max(outside), labels)
}

/// Geometry and intensity model of the edge-enhancement phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaloConfig {
    pub dims: Dims,
    pub seed: u64,
    pub grains: usize,
    pub grain_radius: (f64, f64),
    /// Minimum surface-to-surface spacing of grains.
    pub grain_gap: f64,
    /// Hydrate fills the pore space inside these many random blobs.
    pub hydrate_blobs: usize,
    pub hydrate_radius: (f64, f64),
    /// Hydrate only occurs farther than this from every grain surface.
    pub hydrate_clearance: f64,
    /// `(mean, std)` intensity of each material.
    pub brine: (f64, f64),
    pub quartz: (f64, f64),
    /// Hydrate blobs alternate between two saturation levels.
    pub hydrate: [(f64, f64); 2],
    /// Bright rim just inside grain surfaces (its truth is quartz).
    pub bright_rim: (f64, f64),
    /// Dark rim just outside grain surfaces (its truth is brine): a deeper
    /// inner half and a shallower outer half.
    pub dark_rim: [(f64, f64); 2],
    /// Rim thickness in voxels on each side of a grain surface.
    pub rim_width: f64,
    /// Half-width of the band around grain surfaces scored as halo voxels.
    pub halo_band: f64,
}

impl HaloConfig {
    /// An `n`-voxel cube with grain and hydrate densities independent of `n`.
    pub fn cube(n: usize) -> Self {
        let scale = (n as f64 / 64.0).powi(3);
        HaloConfig {
            dims: Dims::new(n, n, n),
            seed: 7,
            grains: (28.0 * scale).round().max(1.0) as usize,
            grain_radius: (8.0, 12.0),
            grain_gap: 1.0,
            hydrate_blobs: (30.0 * scale).round().max(1.0) as usize,
            hydrate_radius: (8.0, 14.0),
            hydrate_clearance: 3.5,
            brine: (10000.0, 600.0),
            quartz: (18000.0, 500.0),
            hydrate: [(31000.0, 1000.0), (36000.0, 1000.0)],
            bright_rim: (26000.0, 500.0),
            dark_rim: [(4500.0, 400.0), (7000.0, 400.0)],
            rim_width: 1.0,
            halo_band: 2.0,
        }
    }
}

/// Truth classes of the halo phantom.
pub mod halo_class {
    pub const MASKED: u8 = 0;
    pub const BRINE: u8 = 1;
    pub const QUARTZ: u8 = 2;
    pub const HYDRATE: u8 = 3;
}

pub struct HaloPhantom {
    /// 16-bit intensities; zero outside the cylindrical field of view.
    pub raw: VoxelVolume,
    pub truth: LabelVolume,
    /// Voxels within `halo_band` of a grain surface.
    pub halo: Vec<bool>,
    /// Voxels drawn from a rim intensity instead of their material's.
    pub rim: Vec<bool>,
    pub grains: Vec<Sphere>,
    pub hydrate_blobs: Vec<Sphere>,
}

/// Brine-filled cylinder holding quartz grains and hydrate bodies. Grain
/// surfaces carry a bright rim inside and a dark rim outside, the typical
/// signature of propagation-based phase contrast.
pub fn halo_phantom(cfg: &HaloConfig) -> Result<HaloPhantom> {
    let d = cfg.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grains = Vec::new();
    place_spheres(&mut grains, d, cfg.grains, cfg.grain_radius, cfg.grain_gap, false, &mut rng)?;
    let mut hydrates = Vec::new();
    place_spheres(&mut hydrates, d, cfg.hydrate_blobs, cfg.hydrate_radius, -f64::INFINITY, false, &mut rng)?;
    let cx = (d.nx as f64 - 1.0) / 2.0;
    let cy = (d.ny as f64 - 1.0) / 2.0;
    let fov = 0.5 * d.nx.min(d.ny) as f64 - 0.5;
    let noise = |(m, s): (f64, f64)| Normal::new(m, s).expect("finite std");
    let (brine, quartz, bright) = (noise(cfg.brine), noise(cfg.quartz), noise(cfg.bright_rim));
    let hydrate = cfg.hydrate.map(noise);
    let dark = cfg.dark_rim.map(noise);
    let reach = cfg.rim_width.max(cfg.halo_band).max(cfg.hydrate_clearance) + 1.0;
    let surface = stamp(d, &grains, reach, |_, s, x, y, z| s.center_distance(x, y, z) - s.radius);
    // -1 inside a blob of the first level, -2 inside one of the second
    let in_hydrate = stamp(d, &hydrates, 0.0, |k, s, x, y, z| {
        if s.contains(x, y, z) { -1.0 - (k % 2) as f64 } else { f64::INFINITY }
    });
    let slices: Vec<(Vec<u16>, Vec<u8>, Vec<bool>, Vec<bool>)> = (0..d.nz)
        .into_par_iter()
        .map(|z| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(z as u64 + 1);
            let n = d.slice_len();
            let (mut raw, mut truth) = (Vec::with_capacity(n), Vec::with_capacity(n));
            let (mut halo, mut rim) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for y in 0..d.ny {
                for x in 0..d.nx {
                    let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    if r > fov {
                        raw.push(0);
                        truth.push(halo_class::MASKED);
                        halo.push(false);
                        rim.push(false);
                        continue;
                    }
                    let i = d.index(x, y, z);
                    let surf = surface[i] as f64;
                    let (class, dist) = if surf <= 0.0 {
                        (halo_class::QUARTZ, if -surf <= cfg.rim_width { &bright } else { &quartz })
                    } else if in_hydrate[i] < 0.0 && surf > cfg.hydrate_clearance {
                        (halo_class::HYDRATE, &hydrate[(in_hydrate[i] < -1.5) as usize])
                    } else if surf <= 0.5 * cfg.rim_width {
                        (halo_class::BRINE, &dark[0])
                    } else {
                        (halo_class::BRINE, if surf <= cfg.rim_width { &dark[1] } else { &brine })
                    };
                    raw.push(BitDepth::U16.quantize(dist.sample(&mut rng)).max(1));
                    truth.push(class);
                    halo.push(surf.abs() <= cfg.halo_band);
                    rim.push(surf.abs() <= cfg.rim_width && class != halo_class::HYDRATE);
                }
            }
            (raw, truth, halo, rim)
        })
        .collect();
    let mut raw = Vec::with_capacity(d.len());
    let mut truth = Vec::with_capacity(d.len());
    let mut halo = Vec::with_capacity(d.len());
    let mut rim = Vec::with_capacity(d.len());
    for (r, t, h, e) in slices {
        raw.extend(r);
        truth.extend(t);
        halo.extend(h);
        rim.extend(e);
    }
    Ok(HaloPhantom {
        raw: VoxelVolume::new(d, 1.0, BitDepth::U16, raw)?,
        truth: LabelVolume::new(d, 1.0, 3, truth)?
            .with_class_names(vec!["brine".into(), "quartz".into(), "hydrate".into()])?,
        halo,
        rim,
        grains,
        hydrate_blobs: hydrates,
    })
}

/// Per-voxel minimum of `f` over the spheres, evaluated only within `reach`
/// voxels of each sphere's surface; farther voxels hold infinity.
fn stamp(
    d: Dims,
    spheres: &[Sphere],
    reach: f64,
    f: impl Fn(usize, &Sphere, usize, usize, usize) -> f64,
) -> Vec<f32> {
    let mut out = vec![f32::INFINITY; d.len()];
    for (k, s) in spheres.iter().enumerate() {
        let ext = s.radius + reach;
        let range = |c: f64, n: usize| {
            let lo = (c - ext).floor().max(0.0) as usize;
            let hi = ((c + ext).ceil().max(0.0) as usize).min(n - 1);
            lo..=hi
        };
        for z in range(s.center[2], d.nz) {
            for y in range(s.center[1], d.ny) {
                for x in range(s.center[0], d.nx) {
                    let v = f(k, s, x, y, z) as f32;
                    let i = d.index(x, y, z);
                    if v < out[i] {
                        out[i] = v;
                    }
                }
            }
        }
    }
    out
}
