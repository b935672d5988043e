//! Voxel and label volumes, plus the geometry operations that act on them.
//!
//! Storage is slice-major: `z` outermost, then `y`, with `x` varying fastest.
//! Every other module indexes volumes through [`Dims::index`], so this is the
//! only place that layout is defined.

mod io;
mod vtk;

pub use io::{export_csv, export_raw, load_raw, load_tiff_stack, ByteOrder, RawSpec, Table};
pub use vtk::{export_vtk, vtk_bytes, VtkEncoding, VtkSource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.nx;
        let y = (i / self.nx) % self.ny;
        let z = i / self.slice_len();
        (x, y, z)
    }

    fn check_nonzero(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be positive, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    U8,
    #[serde(rename = "16")]
    U16,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::U8),
            16 => Ok(BitDepth::U16),
            other => Err(Error::InvalidParameter(format!(
                "bit depth must be 8 or 16, got {other}"
            ))),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::U8 => 8,
            BitDepth::U16 => 16,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::U8 => u8::MAX as u16,
            BitDepth::U16 => u16::MAX,
        }
    }

    /// Rounds a floating-point intensity to the nearest representable value.
    #[inline]
    pub fn quantize(self, v: f64) -> u16 {
        v.round().clamp(0.0, self.max_value() as f64) as u16
    }
}

/// A 3D grid of scalar intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: Dims,
    voxel_size: f64,
    bit_depth: BitDepth,
    data: Vec<u16>,
}

impl VoxelVolume {
    pub fn new(dims: Dims, voxel_size: f64, bit_depth: BitDepth, data: Vec<u16>) -> Result<Self> {
        dims.check_nonzero()?;
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{dims} volume needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        let max = bit_depth.max_value();
        if let Some(pos) = data.iter().position(|&v| v > max) {
            return Err(Error::InvalidParameter(format!(
                "sample {} at index {pos} exceeds {}-bit range",
                data[pos],
                bit_depth.bits()
            )));
        }
        Ok(VoxelVolume {
            dims,
            voxel_size,
            bit_depth,
            data,
        })
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        dims: Dims,
        voxel_size: f64,
        bit_depth: BitDepth,
        mut f: impl FnMut(usize, usize, usize) -> u16,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, voxel_size, bit_depth, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn slice(&self, z: usize) -> &[u16] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    /// Stack of the listed slices, in the given order.
    pub fn select_slices(&self, zs: &[usize]) -> Result<VoxelVolume> {
        if zs.is_empty() {
            return Err(Error::InvalidParameter("no slices selected".into()));
        }
        if let Some(&z) = zs.iter().find(|&&z| z >= self.dims.nz) {
            return Err(Error::OutOfBounds(format!("slice {z} outside the {} volume", self.dims)));
        }
        let dims = Dims::new(self.dims.nx, self.dims.ny, zs.len());
        let data = zs.iter().flat_map(|&z| self.slice(z).iter().copied()).collect();
        VoxelVolume::new(dims, self.voxel_size, self.bit_depth, data)
    }

    /// Same geometry, new samples. Samples are assumed to be in range.
    pub(crate) fn with_data(&self, data: Vec<u16>) -> VoxelVolume {
        debug_assert_eq!(data.len(), self.data.len());
        VoxelVolume {
            dims: self.dims,
            voxel_size: self.voxel_size,
            bit_depth: self.bit_depth,
            data,
        }
    }

    /// Same geometry, samples rounded from floating point.
    pub(crate) fn quantized(&self, values: &[f64]) -> VoxelVolume {
        let bd = self.bit_depth;
        self.with_data(values.iter().map(|&v| bd.quantize(v)).collect())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// Sub-box of a volume, as start voxel plus extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub z0: usize,
    pub dx: usize,
    pub dy: usize,
    pub dz: usize,
}

impl Roi {
    pub fn new(x0: usize, y0: usize, z0: usize, dx: usize, dy: usize, dz: usize) -> Self {
        Roi {
            x0,
            y0,
            z0,
            dx,
            dy,
            dz,
        }
    }

    pub fn full(dims: Dims) -> Self {
        Roi::new(0, 0, 0, dims.nx, dims.ny, dims.nz)
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.dx, self.dy, self.dz)
    }

    pub fn validate(&self, parent: Dims) -> Result<()> {
        let fits = self.dx >= 1
            && self.dy >= 1
            && self.dz >= 1
            && self.x0 + self.dx <= parent.nx
            && self.y0 + self.dy <= parent.ny
            && self.z0 + self.dz <= parent.nz;
        if fits {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!(
                "roi start ({}, {}, {}) extent {}x{}x{} does not fit volume {parent}",
                self.x0, self.y0, self.z0, self.dx, self.dy, self.dz
            )))
        }
    }

    /// The ROI `inner`, given relative to this one, expressed in parent coordinates.
    pub fn compose(&self, inner: &Roi) -> Roi {
        Roi::new(
            self.x0 + inner.x0,
            self.y0 + inner.y0,
            self.z0 + inner.z0,
            inner.dx,
            inner.dy,
            inner.dz,
        )
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        (self.x0..self.x0 + self.dx).contains(&x)
            && (self.y0..self.y0 + self.dy).contains(&y)
            && (self.z0..self.z0 + self.dz).contains(&z)
    }
}

fn crop_samples<T: Copy>(src: &[T], dims: Dims, roi: &Roi) -> Vec<T> {
    let mut out = Vec::with_capacity(roi.dims().len());
    for z in roi.z0..roi.z0 + roi.dz {
        for y in roi.y0..roi.y0 + roi.dy {
            let start = dims.index(roi.x0, y, z);
            out.extend_from_slice(&src[start..start + roi.dx]);
        }
    }
    out
}

pub fn crop(vol: &VoxelVolume, roi: &Roi) -> Result<VoxelVolume> {
    roi.validate(vol.dims)?;
    Ok(VoxelVolume {
        dims: roi.dims(),
        voxel_size: vol.voxel_size,
        bit_depth: vol.bit_depth,
        data: crop_samples(&vol.data, vol.dims, roi),
    })
}

/// Block-mean reduction by an integer factor along every axis.
///
/// Output dims are `ceil(dim / factor)`; border blocks that are only partly
/// inside the volume are averaged over the voxels they do contain.
pub fn downsample(vol: &VoxelVolume, factor: usize) -> Result<VoxelVolume> {
    if factor < 1 {
        return Err(Error::InvalidParameter(
            "downsample factor must be at least 1".into(),
        ));
    }
    if factor == 1 {
        return Ok(vol.clone());
    }
    let d = vol.dims;
    let out_dims = Dims::new(
        d.nx.div_ceil(factor),
        d.ny.div_ceil(factor),
        d.nz.div_ceil(factor),
    );
    let mut data = Vec::with_capacity(out_dims.len());
    for oz in 0..out_dims.nz {
        for oy in 0..out_dims.ny {
            for ox in 0..out_dims.nx {
                let mut sum = 0.0;
                let mut count = 0usize;
                for z in oz * factor..((oz + 1) * factor).min(d.nz) {
                    for y in oy * factor..((oy + 1) * factor).min(d.ny) {
                        for x in ox * factor..((ox + 1) * factor).min(d.nx) {
                            sum += vol.get(x, y, z) as f64;
                            count += 1;
                        }
                    }
                }
                data.push(vol.bit_depth.quantize(sum / count as f64));
            }
        }
    }
    Ok(VoxelVolume {
        dims: out_dims,
        voxel_size: vol.voxel_size * factor as f64,
        bit_depth: vol.bit_depth,
        data,
    })
}

/// A 3D grid of class labels. Label 0 marks masked/background voxels,
/// phases are numbered `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVolume {
    dims: Dims,
    voxel_size: f64,
    k: u8,
    labels: Vec<u8>,
    class_names: Option<Vec<String>>,
}

impl LabelVolume {
    pub fn new(dims: Dims, voxel_size: f64, k: u8, labels: Vec<u8>) -> Result<Self> {
        dims.check_nonzero()?;
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{dims} label volume needs {} labels, got {}",
                dims.len(),
                labels.len()
            )));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > k) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} exceeds class count {k}"
            )));
        }
        Ok(LabelVolume {
            dims,
            voxel_size,
            k,
            labels,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k as usize {
            return Err(Error::InvalidParameter(format!(
                "{} class names given for {} classes",
                names.len(),
                self.k
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.dims.index(x, y, z)]
    }

    pub fn slice(&self, z: usize) -> &[u8] {
        let n = self.dims.slice_len();
        &self.labels[z * n..(z + 1) * n]
    }

    /// Voxel count per label, indexed `0..=k`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k as usize + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn crop(&self, roi: &Roi) -> Result<LabelVolume> {
        roi.validate(self.dims)?;
        Ok(LabelVolume {
            dims: roi.dims(),
            voxel_size: self.voxel_size,
            k: self.k,
            labels: crop_samples(&self.labels, self.dims, roi),
            class_names: self.class_names.clone(),
        })
    }
}
