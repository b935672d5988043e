//! 8-bit PNG rendering of single slices.

use geoseg::{LabelVolume, VoxelVolume};

/// Fixed categorical colours; label 0 (masked) is black and labels beyond
/// the table wrap around from index 1.
pub const PALETTE: [[u8; 3]; 13] = [
    [0, 0, 0],
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
];

pub fn label_color(l: u8) -> [u8; 3] {
    if l == 0 {
        PALETTE[0]
    } else {
        PALETTE[1 + (l as usize - 1) % (PALETTE.len() - 1)]
    }
}

/// Display window `[lo, hi]`: `lo` and below render black, `hi` and above
/// white, linear in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// Parses `"lo,hi"`.
    pub fn parse(s: &str) -> Result<Window, String> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("window '{s}' must be 'lo,hi'"))?;
        let lo: f64 = a.trim().parse().map_err(|_| format!("window low '{a}' is not a number"))?;
        let hi: f64 = b.trim().parse().map_err(|_| format!("window high '{b}' is not a number"))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("window needs finite lo < hi, got {lo},{hi}"));
        }
        Ok(Window { lo, hi })
    }

    /// Minimum to maximum of the volume.
    pub fn full(vol: &VoxelVolume) -> Window {
        let lo = vol.data().iter().copied().min().unwrap_or(0) as f64;
        let hi = vol.data().iter().copied().max().unwrap_or(0) as f64;
        Window { lo, hi }
    }

    pub fn map(&self, v: u16) -> u8 {
        let v = v as f64;
        if self.hi <= self.lo {
            return if v >= self.hi { 255 } else { 0 };
        }
        ((v - self.lo) / (self.hi - self.lo) * 255.0).round().clamp(0.0, 255.0) as u8
    }
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(data).expect("in-memory png data");
    }
    out
}

/// Grayscale PNG of slice `z`. The caller checks `z`.
pub fn gray_slice(vol: &VoxelVolume, z: usize, window: Window) -> Vec<u8> {
    let d = vol.dims();
    let pixels: Vec<u8> = vol.slice(z).iter().map(|&v| window.map(v)).collect();
    encode(d.nx, d.ny, png::ColorType::Grayscale, &pixels)
}

/// RGB PNG of slice `z` in the categorical palette.
pub fn label_slice(labels: &LabelVolume, z: usize) -> Vec<u8> {
    let d = labels.dims();
    let pixels: Vec<u8> = labels.slice(z).iter().flat_map(|&l| label_color(l)).collect();
    encode(d.nx, d.ny, png::ColorType::Rgb, &pixels)
}
