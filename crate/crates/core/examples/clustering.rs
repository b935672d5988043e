//! K-means and fuzzy c-means on a noisy three-phase volume, with the
//! per-class agreement against the known phases.
//!
//! cargo run --release --example clustering -- [k]

use geoseg::clustering::{fcm_segment, kmeans_segment, FcmConfig, KmeansConfig};
use geoseg::{BitDepth, Dims, LabelVolume, VoxelVolume};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LEVELS: [f64; 3] = [8000.0, 20000.0, 34000.0];

fn agreement(labels: &LabelVolume, truth: &[u8]) -> f64 {
    let same = labels.labels().iter().zip(truth).filter(|(a, b)| a == b).count();
    same as f64 / truth.len() as f64
}

fn main() -> anyhow::Result<()> {
    let k: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let d = Dims::new(64, 64, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 2200.0)?;
    let mut truth = Vec::with_capacity(d.len());
    let vol = VoxelVolume::from_fn(d, 1.0, BitDepth::U16, |x, y, _| {
        let phase = (x / 16 + y / 16) % 3;
        truth.push(phase as u8 + 1);
        BitDepth::U16.quantize(LEVELS[phase] + noise.sample(&mut rng))
    })?;

    let km = kmeans_segment(&vol, &KmeansConfig { restarts: 5, mask_threshold: None, ..KmeansConfig::with_k(k) })?;
    println!(
        "k-means: centers {:?}, objective {:.3e} after {} iterations",
        km.centers.iter().map(|c| c.round()).collect::<Vec<_>>(),
        km.objective,
        km.iterations_used
    );

    let fcm = fcm_segment(&vol, &FcmConfig { mask_threshold: None, ..FcmConfig::with_c(k, 2.0) })?;
    println!(
        "fcm:     centers {:?}, objective {:.3e} after {} iterations",
        fcm.centers.iter().map(|c| c.round()).collect::<Vec<_>>(),
        fcm.objective,
        fcm.iterations_used
    );
    if let Some(u) = fcm.memberships_at(&vol, d.index(8, 8, 0)) {
        println!("memberships of voxel (8, 8, 0): {:?}", u.iter().map(|m| (m * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
    if k == 3 {
        println!("agreement with truth: k-means {:.2}%, fcm {:.2}%", 100.0 * agreement(&km.labels, &truth), 100.0 * agreement(&fcm.labels, &truth));
    }
    Ok(())
}
