//! Legacy VTK `STRUCTURED_POINTS` writer.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BitDepth, Dims, LabelVolume, VoxelVolume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VtkEncoding {
    Ascii,
    /// Big-endian samples, as legacy VTK readers expect.
    #[default]
    Binary,
}

/// Anything that can be written as a single scalar point-data array.
pub enum VtkSource<'a> {
    Intensity(&'a VoxelVolume),
    Labels(&'a LabelVolume),
}

impl<'a> From<&'a VoxelVolume> for VtkSource<'a> {
    fn from(v: &'a VoxelVolume) -> Self {
        VtkSource::Intensity(v)
    }
}

impl<'a> From<&'a LabelVolume> for VtkSource<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        VtkSource::Labels(v)
    }
}

impl VtkSource<'_> {
    fn dims(&self) -> Dims {
        match self {
            VtkSource::Intensity(v) => v.dims(),
            VtkSource::Labels(v) => v.dims(),
        }
    }

    fn spacing(&self) -> f64 {
        match self {
            VtkSource::Intensity(v) => v.voxel_size(),
            VtkSource::Labels(v) => v.voxel_size(),
        }
    }

    fn header_names(&self) -> (&'static str, &'static str, &'static str) {
        match self {
            VtkSource::Intensity(v) if v.bit_depth() == BitDepth::U16 => {
                ("geoseg intensity volume", "intensity", "unsigned_short")
            }
            VtkSource::Intensity(_) => ("geoseg intensity volume", "intensity", "unsigned_char"),
            VtkSource::Labels(_) => ("geoseg label volume", "labels", "unsigned_char"),
        }
    }
}

/// Serializes a volume into legacy VTK bytes.
pub fn vtk_bytes(src: &VtkSource<'_>, encoding: VtkEncoding) -> Vec<u8> {
    let d = src.dims();
    let (title, name, ty) = src.header_names();
    let s = src.spacing();
    let mut header = String::new();
    let _ = writeln!(header, "# vtk DataFile Version 3.0");
    let _ = writeln!(header, "{title}");
    let _ = writeln!(
        header,
        "{}",
        match encoding {
            VtkEncoding::Ascii => "ASCII",
            VtkEncoding::Binary => "BINARY",
        }
    );
    let _ = writeln!(header, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(header, "DIMENSIONS {} {} {}", d.nx, d.ny, d.nz);
    let _ = writeln!(header, "SPACING {s} {s} {s}");
    let _ = writeln!(header, "ORIGIN 0 0 0");
    let _ = writeln!(header, "POINT_DATA {}", d.len());
    let _ = writeln!(header, "SCALARS {name} {ty} 1");
    let _ = writeln!(header, "LOOKUP_TABLE default");

    let mut out = header.into_bytes();
    match encoding {
        VtkEncoding::Ascii => {
            let mut body = String::new();
            let mut push_rows = |values: &mut dyn Iterator<Item = u16>| {
                let mut col = 0;
                for v in values {
                    if col > 0 {
                        body.push(' ');
                    }
                    let _ = write!(body, "{v}");
                    col += 1;
                    if col == d.nx {
                        body.push('\n');
                        col = 0;
                    }
                }
            };
            match src {
                VtkSource::Intensity(v) => push_rows(&mut v.data().iter().copied()),
                VtkSource::Labels(l) => push_rows(&mut l.labels().iter().map(|&x| x as u16)),
            }
            out.extend_from_slice(body.as_bytes());
        }
        VtkEncoding::Binary => {
            match src {
                VtkSource::Intensity(v) if v.bit_depth() == BitDepth::U16 => {
                    for &x in v.data() {
                        out.extend_from_slice(&x.to_be_bytes());
                    }
                }
                VtkSource::Intensity(v) => out.extend(v.data().iter().map(|&x| x as u8)),
                VtkSource::Labels(l) => out.extend_from_slice(l.labels()),
            }
            out.push(b'\n');
        }
    }
    out
}

pub fn export_vtk<'a>(
    src: impl Into<VtkSource<'a>>,
    path: impl AsRef<Path>,
    encoding: VtkEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = vtk_bytes(&src.into(), encoding);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}
