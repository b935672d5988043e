#![allow(dead_code)]

use std::path::{Path, PathBuf};

use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::volume::{export_raw, ByteOrder};
use geoseg::{BitDepth, Dims, LabelVolume, VoxelVolume};

pub const PORE: u16 = 60;
pub const GRAIN: u16 = 180;

/// Sphere pack with dark pores (label 1) in a bright matrix (label 2) and a
/// small deterministic texture on both, so that two clusters separate the
/// phases exactly.
pub fn sphere_pack(dims: Dims, count: usize, seed: u64) -> (VoxelVolume, LabelVolume) {
    let spheres = random_spheres(dims, count, 3.0, 6.0, 1.0, seed).unwrap();
    let truth = sphere_labels(dims, &spheres, 1, 2).unwrap();
    let vol = VoxelVolume::from_fn(dims, 1.0, BitDepth::U8, |x, y, z| {
        let texture = ((x * 7 + y * 13 + z * 3) % 11) as u16;
        let base = if truth.get(x, y, z) == 1 { PORE } else { GRAIN };
        base + texture
    })
    .unwrap();
    (vol, truth)
}

pub fn write_raw(dir: &Path, name: &str, vol: &VoxelVolume) -> PathBuf {
    let p = dir.join(name);
    export_raw(vol, &p, ByteOrder::Little).unwrap();
    p
}

/// `[input]` table of a run config for a little-endian raw file.
pub fn raw_input_toml(path: &Path, vol: &VoxelVolume) -> String {
    let d = vol.dims();
    format!(
        "[input]\nkind = \"raw\"\npath = {:?}\ndims = [{}, {}, {}]\nbits = {}\nvoxel_size = {}\n",
        path.display().to_string(),
        d.nx,
        d.ny,
        d.nz,
        vol.bit_depth().bits(),
        vol.voxel_size()
    )
}
