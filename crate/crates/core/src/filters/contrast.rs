use crate::error::{Error, Result};
use crate::volume::VoxelVolume;

/// Percentile of the sample distribution, linearly interpolated between order statistics.
fn percentile(hist: &[u64], n: u64, pct: f64) -> f64 {
    let rank = pct / 100.0 * (n - 1) as f64;
    let lo_rank = rank.floor() as u64;
    let hi_rank = rank.ceil() as u64;
    let value_at = |r: u64| {
        let mut seen = 0u64;
        for (v, &c) in hist.iter().enumerate() {
            seen += c;
            if seen > r {
                return v as f64;
            }
        }
        (hist.len() - 1) as f64
    };
    let lo = value_at(lo_rank);
    let hi = value_at(hi_rank);
    lo + (hi - lo) * (rank - lo_rank as f64)
}

/// Maps the `[P_low, P_high]` intensity percentiles linearly onto the full
/// range of the bit depth, clamping outside.
pub fn contrast_stretch(vol: &VoxelVolume, low_pct: f64, high_pct: f64) -> Result<VoxelVolume> {
    if !(0.0..100.0).contains(&low_pct) || !(low_pct < high_pct && high_pct <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= low < high <= 100, got ({low_pct}, {high_pct})"
        )));
    }
    let max = vol.bit_depth().max_value() as f64;
    let mut hist = vec![0u64; max as usize + 1];
    for &v in vol.data() {
        hist[v as usize] += 1;
    }
    let n = vol.data().len() as u64;
    let lo = percentile(&hist, n, low_pct);
    let hi = percentile(&hist, n, high_pct);
    if hi <= lo {
        return Err(Error::DegenerateHistogram(format!(
            "percentiles {low_pct} and {high_pct} both map to intensity {lo}"
        )));
    }
    let bd = vol.bit_depth();
    Ok(vol.with_data(
        vol.data()
            .iter()
            .map(|&v| bd.quantize((v as f64 - lo) * max / (hi - lo)))
            .collect(),
    ))
}
