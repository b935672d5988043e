use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BitDepth, Dims, VoxelVolume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    #[default]
    Little,
    Big,
}

/// Geometry and encoding of a headerless raw volume file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSpec {
    pub dims: Dims,
    pub bit_depth: BitDepth,
    #[serde(default)]
    pub byte_order: ByteOrder,
    #[serde(default = "default_voxel_size")]
    pub voxel_size: f64,
    /// File slices are stored y-fastest; transpose each slice while reading.
    #[serde(default)]
    pub transpose_slices: bool,
}

fn default_voxel_size() -> f64 {
    1.0
}

impl RawSpec {
    pub fn new(dims: Dims, bit_depth: BitDepth) -> Self {
        RawSpec {
            dims,
            bit_depth,
            byte_order: ByteOrder::Little,
            voxel_size: 1.0,
            transpose_slices: false,
        }
    }

    pub fn byte_order(mut self, order: ByteOrder) -> Self {
        self.byte_order = order;
        self
    }

    pub fn voxel_size(mut self, size: f64) -> Self {
        self.voxel_size = size;
        self
    }

    pub fn expected_bytes(&self) -> usize {
        self.dims.len() * self.bit_depth.bytes()
    }
}

fn decode_samples(bytes: &[u8], depth: BitDepth, order: ByteOrder) -> Vec<u16> {
    match depth {
        BitDepth::U8 => bytes.iter().map(|&b| b as u16).collect(),
        BitDepth::U16 => bytes
            .chunks_exact(2)
            .map(|c| match order {
                ByteOrder::Little => u16::from_le_bytes([c[0], c[1]]),
                ByteOrder::Big => u16::from_be_bytes([c[0], c[1]]),
            })
            .collect(),
    }
}

/// Reads a headerless raw volume, slice after slice.
///
/// Files longer than the requested geometry are accepted; only the leading
/// `nx * ny * nz` samples are read.
pub fn load_raw(path: impl AsRef<Path>, spec: &RawSpec) -> Result<VoxelVolume> {
    let path = path.as_ref();
    if spec.dims.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "raw dimensions must be positive, got {}",
            spec.dims
        )));
    }
    let expected = spec.expected_bytes();
    let actual = std::fs::metadata(path)
        .map_err(|e| Error::io(path, e))?
        .len() as usize;
    if actual < expected {
        return Err(Error::DimensionMismatch(format!(
            "{} holds {actual} bytes but {} at {} bits needs {expected}",
            path.display(),
            spec.dims,
            spec.bit_depth.bits()
        )));
    }
    let mut bytes = vec![0u8; expected];
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    reader
        .read_exact(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut data = decode_samples(&bytes, spec.bit_depth, spec.byte_order);
    if spec.transpose_slices {
        let Dims { nx, ny, .. } = spec.dims;
        let n = nx * ny;
        for slice in data.chunks_exact_mut(n) {
            let stored = slice.to_vec();
            for x in 0..nx {
                for y in 0..ny {
                    slice[x + nx * y] = stored[y + ny * x];
                }
            }
        }
    }
    VoxelVolume::new(spec.dims, spec.voxel_size, spec.bit_depth, data)
}

/// Writes the byte inverse of [`load_raw`] (without transposition).
pub fn export_raw(vol: &VoxelVolume, path: impl AsRef<Path>, order: ByteOrder) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(vol.data().len() * vol.bit_depth().bytes());
    match vol.bit_depth() {
        BitDepth::U8 => bytes.extend(vol.data().iter().map(|&v| v as u8)),
        BitDepth::U16 => {
            for &v in vol.data() {
                match order {
                    ByteOrder::Little => bytes.extend_from_slice(&v.to_le_bytes()),
                    ByteOrder::Big => bytes.extend_from_slice(&v.to_be_bytes()),
                }
            }
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_tiff_slice(path: &Path) -> Result<(u32, u32, BitDepth, Vec<u16>)> {
    let tiff_err = |e: tiff::TiffError| match e {
        tiff::TiffError::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = tiff::decoder::Decoder::new(BufReader::new(file)).map_err(tiff_err)?;
    let (w, h) = decoder.dimensions().map_err(tiff_err)?;
    let depth = match decoder.colortype().map_err(tiff_err)? {
        tiff::ColorType::Gray(8) => BitDepth::U8,
        tiff::ColorType::Gray(16) => BitDepth::U16,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: only 8/16-bit grayscale is supported, found {other:?}",
                path.display()
            )))
        }
    };
    let data = match decoder.read_image().map_err(tiff_err)? {
        tiff::decoder::DecodingResult::U8(v) => v.into_iter().map(u16::from).collect(),
        tiff::decoder::DecodingResult::U16(v) => v,
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: unexpected sample type",
                path.display()
            )))
        }
    };
    Ok((w, h, depth, data))
}

/// Stacks single-image grayscale TIFF files in the order given.
pub fn load_tiff_stack<P: AsRef<Path>>(paths: &[P], voxel_size: f64) -> Result<VoxelVolume> {
    let Some(first) = paths.first() else {
        return Err(Error::InvalidParameter("empty TIFF path list".into()));
    };
    let (w, h, depth, mut data) = read_tiff_slice(first.as_ref())?;
    for p in &paths[1..] {
        let p = p.as_ref();
        let (wi, hi, di, slice) = read_tiff_slice(p)?;
        if (wi, hi, di) != (w, h, depth) {
            return Err(Error::DimensionMismatch(format!(
                "{} is {wi}x{hi} at {} bits, expected {w}x{h} at {} bits like {}",
                p.display(),
                di.bits(),
                depth.bits(),
                first.as_ref().display()
            )));
        }
        data.extend_from_slice(&slice);
    }
    let dims = Dims::new(w as usize, h as usize, paths.len());
    VoxelVolume::new(dims, voxel_size, depth, data)
}

/// A rectangular table of named numeric columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Renders the table as CSV text.
    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Header row, then one record per row. Decimals always use `.`.
pub fn export_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    table
        .write_csv(BufWriter::new(file))
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(&path, io),
            other => Error::io(&path, std::io::Error::other(format!("{other:?}"))),
        })
}
