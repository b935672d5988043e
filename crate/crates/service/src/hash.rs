//! Content digests for manifests and artifact lineage.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use geoseg::{LabelVolume, VoxelVolume};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn geometry(h: &mut Sha256, tag: &str, d: geoseg::Dims, voxel_size: f64) {
    h.update(tag.as_bytes());
    h.update([0u8]);
    for n in [d.nx, d.ny, d.nz] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(voxel_size.to_bits().to_le_bytes());
}

pub fn bytes(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Digest of geometry, bit depth and samples.
pub fn volume(v: &VoxelVolume) -> String {
    let mut h = Sha256::new();
    geometry(&mut h, "volume", v.dims(), v.voxel_size());
    h.update(v.bit_depth().bits().to_le_bytes());
    let mut buf = Vec::with_capacity(v.data().len() * 2);
    for s in v.data() {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    h.update(&buf);
    hex(&h.finalize())
}

/// Digest of geometry, class count, class names and labels.
pub fn labels(l: &LabelVolume) -> String {
    let mut h = Sha256::new();
    geometry(&mut h, "labels", l.dims(), l.voxel_size());
    h.update([l.k()]);
    for name in l.class_names().unwrap_or_default() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    h.update(l.labels());
    hex(&h.finalize())
}

/// Digest and length of a file's contents.
pub fn file(path: &Path) -> Result<(String, u64)> {
    let mut f = std::fs::File::open(path).map_err(|e| ServiceError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| ServiceError::io(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        h.update(&buf[..n]);
    }
    Ok((hex(&h.finalize()), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoseg::{BitDepth, Dims};

    #[test]
    fn known_digest() {
        assert_eq!(bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn geometry_is_part_of_the_digest() {
        let a = VoxelVolume::new(Dims::new(2, 1, 1), 1.0, BitDepth::U8, vec![1, 2]).unwrap();
        let b = VoxelVolume::new(Dims::new(1, 2, 1), 1.0, BitDepth::U8, vec![1, 2]).unwrap();
        let c = VoxelVolume::new(Dims::new(2, 1, 1), 1.0, BitDepth::U16, vec![1, 2]).unwrap();
        let d = VoxelVolume::new(Dims::new(2, 1, 1), 0.5, BitDepth::U8, vec![1, 2]).unwrap();
        let all = [volume(&a), volume(&b), volume(&c), volume(&d)];
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(all[i], all[j]);
            }
        }
        assert_eq!(volume(&a), volume(&a.clone()));
    }
}
