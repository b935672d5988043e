//! Dual-clustering removal of edge-enhancement halos on a synthetic phantom,
//! compared with a direct three-phase k-means.
//!
//! cargo run --release --example ede_pipeline -- [edge] [seed]

use std::time::Instant;

use geoseg::clustering::{kmeans_segment, KmeansConfig};
use geoseg::ede_removal::{dual_cluster_pipeline, EdeConfig};
use geoseg::synthetic::{halo_phantom, HaloConfig};
use geoseg::LabelVolume;

fn errors(labels: &LabelVolume, truth: &LabelVolume, halo: &[bool]) -> (f64, f64) {
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

fn main() -> anyhow::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(96);
    let t = Instant::now();
    let mut hc = HaloConfig::cube(n);
    if let Some(seed) = std::env::args().nth(2) {
        hc.seed = seed.parse()?;
    }
    let phantom = halo_phantom(&hc)?;
    println!("phantom {n}^3 built in {:.2?}", t.elapsed());

    let mut mix = [0usize; 6];
    for ((&t, &r), &v) in phantom.truth.labels().iter().zip(&phantom.rim).zip(phantom.raw.data()) {
        if v > 0 {
            mix[if r { t as usize + 3 } else { t as usize }] += 1;
        }
    }
    let total: usize = mix.iter().sum();
    let names = ["", "brine", "quartz", "hydrate", "dark rim", "bright rim"];
    for (name, c) in names.iter().zip(mix).skip(1) {
        print!("{name} {:.1}%  ", 100.0 * c as f64 / total as f64);
    }
    println!();

    // eight evenly spread slices stand in for a hand-picked subset
    let cfg = EdeConfig {
        seg_slices: (0..8).map(|i| (2 * i + 1) * n / 16).collect(),
        ..Default::default()
    };
    let t = Instant::now();
    let out = dual_cluster_pipeline(&phantom.raw, &cfg)?;
    println!("pipeline ran in {:.2?}", t.elapsed());
    println!("over-clustering centers: {:?}", out.stage_labels.centers.iter().map(|c| c.round()).collect::<Vec<_>>());
    for s in &out.report.phases {
        println!(
            "  {:<8} labels {}-{}  n={:<7} min={:?} max={:?} mean={:.0}",
            s.phase.name(),
            s.first,
            s.last,
            s.count,
            s.min,
            s.max,
            s.mean.unwrap_or(f64::NAN)
        );
    }
    for a in &out.advisory {
        println!("advisory: {a}");
    }
    let direct = kmeans_segment(&phantom.raw, &KmeansConfig::with_k(3))?;
    let (pb, ph) = errors(&out.final_labels, &phantom.truth, &phantom.halo);
    let (db, dh) = errors(&direct.labels, &phantom.truth, &phantom.halo);
    println!("final centers {:?}", out.final_centers);
    println!("pipeline: bulk error {:.4}%, halo error {:.2}%", pb * 100.0, ph * 100.0);
    println!("direct:   bulk error {:.4}%, halo error {:.2}%", db * 100.0, dh * 100.0);
    Ok(())
}
