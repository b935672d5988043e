//! Writes a sphere-pack volume and a run config, runs it and replays the
//! manifest on a different thread count.
//!
//! cargo run --release -p geoseg-service --example run_config -- [out_dir]

use std::path::PathBuf;

use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::volume::{export_raw, ByteOrder};
use geoseg::{BitDepth, Dims, VoxelVolume};
use geoseg_service::{replay, run, RunConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("geoseg-run"));
    std::fs::create_dir_all(&out)?;

    let d = Dims::new(64, 64, 40);
    let labels = sphere_labels(d, &random_spheres(d, 20, 3.0, 8.0, 1.0, 6)?, 1, 2)?;
    let vol = VoxelVolume::from_fn(d, 1.0, BitDepth::U8, |x, y, z| {
        let t = ((x * 7 + y * 13 + z * 3) % 23) as u16;
        if labels.get(x, y, z) == 1 { 50 + t } else { 170 + t }
    })?;
    export_raw(&vol, out.join("pack.raw"), ByteOrder::Little)?;

    let config = r#"
[input]
kind = "raw"
path = "pack.raw"
dims = [64, 64, 40]
bits = 8
voxel_size = 0.74

[[stage]]
op = "ad"
threshold = 40

[[stage]]
op = "nlm"
search_window = 9
neighborhood = 3

[[stage]]
op = "kmeans"
k = 2

[[stage]]
op = "analyze"
ops = ["porosity", "trend", "psd", "rev"]

[[stage]]
op = "export"
layer = "labels"
format = "vtk"
file = "labels.vtk"
"#;
    let path = out.join("pack.toml");
    std::fs::write(&path, config)?;
    let cfg = RunConfig::load(&path)?;

    let manifest = run(&cfg, &out.join("run"), Some(1))?;
    for s in &manifest.stages {
        println!("stage {} {:<8} {}", s.index, s.op, &s.product[..16]);
    }
    let r = replay(&manifest, &out.join("replay"), Some(4))?;
    println!(
        "replay on {} threads: {}",
        r.replayed.threads,
        if r.identical() { "identical".to_string() } else { r.mismatches.join("; ") }
    );
    println!("outputs in {}", out.join("run").display());
    Ok(())
}
