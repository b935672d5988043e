//! Trains LSSVM, bagged and boosted tree classifiers from a handful of
//! labelled pixels, cross-validates them and labels the whole volume.
//!
//! cargo run --release --example supervised

use geoseg::supervised::{
    classify_volume, cross_validate, extract_features, segmentation_entropy, EnsembleMethod, EnsembleParams,
    LssvmParams, Trainer, TrainingTable,
};
use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::{BitDepth, Dims, VoxelVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> anyhow::Result<()> {
    let d = Dims::new(48, 48, 24);
    let spheres = random_spheres(d, 14, 3.0, 7.0, 1.0, 8)?;
    let truth = sphere_labels(d, &spheres, 1, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 1800.0)?;
    let vol = VoxelVolume::from_fn(d, 1.0, BitDepth::U16, |x, y, z| {
        let base = if truth.get(x, y, z) == 1 { 11000.0 } else { 19000.0 };
        BitDepth::U16.quantize(base + noise.sample(&mut rng))
    })?;

    let mut table = TrainingTable::default();
    let mut picks = ChaCha8Rng::seed_from_u64(3);
    while table.rows.len() < 80 {
        let (x, y, z) = (picks.random_range(0..d.nx), picks.random_range(0..d.ny), picks.random_range(0..d.nz));
        let c = truth.get(x, y, z);
        let pores = table.rows.iter().filter(|r| r.class_id == 1).count();
        if c == 1 || pores >= 20 {
            table.push(c, if c == 1 { "pore" } else { "matrix" }, x, y, z);
        }
    }
    let features = extract_features(&vol, &table)?;

    let trainers = [
        ("lssvm", Trainer::Lssvm(LssvmParams::default())),
        ("bagging", Trainer::Ensemble(EnsembleParams::new(EnsembleMethod::Bagging, 25, 6))),
        ("adaboost", Trainer::Ensemble(EnsembleParams::new(EnsembleMethod::AdaBoost, 25, 2))),
    ];
    for (name, trainer) in &trainers {
        let cv = cross_validate(&features, 5, trainer, 1)?;
        let model = trainer.train(&features)?;
        let labels = classify_volume(&model, &vol)?;
        let agree = labels.labels().iter().zip(truth.labels()).filter(|(a, b)| a == b).count() as f64 / d.len() as f64;
        println!(
            "{name:<9} cv {:.1}% +- {:.1}  volume agreement {:.2}%  entropy {:.3}",
            100.0 * cv.mean,
            100.0 * cv.std,
            100.0 * agree,
            segmentation_entropy(&labels)?
        );
    }
    Ok(())
}
