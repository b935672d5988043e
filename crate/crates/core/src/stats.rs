//! Small descriptive statistics shared by the analysis modules.

use serde::{Deserialize, Serialize};

/// Equal-width histogram spanning `[min, max]` of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub bin_width: f64,
}

impl Histogram {
    /// `bins` equal bins between the smallest and largest value; the last
    /// bin is closed. Constant data fall in one unit-wide bin around the value.
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        if values.is_empty() {
            return Histogram {
                centers: Vec::new(),
                counts: Vec::new(),
                bin_width: 0.0,
            };
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram {
            centers: (0..bins).map(|b| lo + width * (b as f64 + 0.5)).collect(),
            counts,
            bin_width: width,
        }
    }
}

/// Mean, sample standard deviation and third standardized moment.
pub fn moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let std = if values.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    let pop = (m2 / n).sqrt();
    let skew = if pop > 0.0 { m3 / n / pop.powi(3) } else { 0.0 };
    (mean, std, skew)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let h = Histogram::new(&[0.0, 1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(h.counts, vec![2, 3]);
        assert_eq!(h.centers, vec![1.0, 3.0]);
        let c = Histogram::new(&[5.0, 5.0], 10);
        assert_eq!(c.counts.iter().sum::<usize>(), 2);
    }

    #[test]
    fn moments_of_symmetric_data() {
        let (m, s, k) = moments(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(k, 0.0);
        let (_, _, right) = moments(&[0.0, 0.0, 0.0, 10.0]);
        assert!(right > 0.0);
    }
}
