//! Round trip of a synthetic volume through raw, TIFF-free loading, cropping,
//! downsampling and VTK/CSV export.
//!
//! cargo run --example volume_io -- [out_dir]

use std::path::PathBuf;

use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::volume::{
    crop, downsample, export_csv, export_raw, export_vtk, load_raw, ByteOrder, RawSpec, Table, VtkEncoding,
};
use geoseg::{BitDepth, Dims, Roi, VoxelVolume};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("geoseg-io"));
    std::fs::create_dir_all(&out)?;

    let d = Dims::new(64, 64, 48);
    let spheres = random_spheres(d, 12, 4.0, 9.0, 1.0, 3)?;
    let labels = sphere_labels(d, &spheres, 1, 2)?;
    let vol = VoxelVolume::from_fn(d, 2.5, BitDepth::U16, |x, y, z| {
        if labels.get(x, y, z) == 1 { 9000 } else { 21000 }
    })?;

    let raw = out.join("pack.raw");
    export_raw(&vol, &raw, ByteOrder::Big)?;
    let back = load_raw(&raw, &RawSpec::new(d, BitDepth::U16).byte_order(ByteOrder::Big).voxel_size(2.5))?;
    assert_eq!(back, vol);
    println!("{} bytes written to {}", std::fs::metadata(&raw)?.len(), raw.display());

    let roi = Roi::new(8, 8, 4, 40, 40, 32);
    let cropped = crop(&vol, &roi)?;
    let coarse = downsample(&cropped, 2)?;
    println!("crop {} -> {}, downsample x2 -> {} at {} per voxel", d, cropped.dims(), coarse.dims(), coarse.voxel_size());

    export_vtk(&coarse, out.join("coarse.vtk"), VtkEncoding::Binary)?;
    export_vtk(&labels.crop(&roi)?, out.join("labels.vtk"), VtkEncoding::Ascii)?;

    let mut t = Table::new(["slice", "mean"]);
    for z in 0..coarse.dims().nz {
        let s = coarse.slice(z);
        t.push(vec![z as f64, s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64]);
    }
    export_csv(&t, out.join("slice_means.csv"))?;
    println!("vtk and csv files in {}", out.display());
    Ok(())
}
