use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::model::Trainer;
use crate::error::{Error, Result};
use crate::volume::LabelVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
}

/// Stratified fold index for every sample. Each class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one.
pub fn fold_assignment(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if folds > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds requested for {} samples",
            labels.len()
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % folds;
            next += 1;
        }
    }
    Ok(fold)
}

pub fn cross_validate(f: &FeatureMatrix, folds: usize, trainer: &Trainer, seed: u64) -> Result<CvReport> {
    let assign = fold_assignment(f.labels(), folds, seed)?;
    let mut acc = Vec::with_capacity(folds);
    for k in 0..folds {
        let train: Vec<usize> = (0..f.len()).filter(|&i| assign[i] != k).collect();
        let test: Vec<usize> = (0..f.len()).filter(|&i| assign[i] == k).collect();
        let model = trainer.train(&f.subset(&train))?;
        acc.push(model.accuracy(&f.subset(&test)));
    }
    let mean = acc.iter().sum::<f64>() / folds as f64;
    let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (folds - 1) as f64;
    Ok(CvReport {
        fold_accuracies: acc,
        mean,
        std: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps a threshold down through the distinct scores; a sample is called
/// positive when its score is at or above the threshold.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::UndefinedRoc("ROC needs both positive and negative samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((fp / neg, tp / pos));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Shannon entropy in bits of the class proportions over unmasked voxels.
pub fn segmentation_entropy(labels: &LabelVolume) -> Result<f64> {
    let counts = labels.counts();
    let total: usize = counts[1..].iter().sum();
    if total == 0 {
        return Err(Error::EmptyRegion("every voxel is masked".into()));
    }
    Ok(counts[1..]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    #[test]
    fn folds_partition_and_balance() {
        let labels: Vec<u8> = (0..23).map(|i| if i % 3 == 0 { 1 } else { 2 }).collect();
        let f = fold_assignment(&labels, 10, 1).unwrap();
        let mut sizes = [0; 10];
        f.iter().for_each(|&k| sizes[k] += 1);
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(fold_assignment(&labels, 24, 1).is_err());
    }

    #[test]
    fn roc_extremes() {
        let labels = [true, false, true, false];
        let exact: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        assert_eq!(roc_curve(&exact, &labels).unwrap().auc, 1.0);
        let reversed: Vec<f64> = exact.iter().map(|s| 1.0 - s).collect();
        assert_eq!(roc_curve(&reversed, &labels).unwrap().auc, 0.0);
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedRoc(_))));
        let tied = roc_curve(&[0.5; 4], &labels).unwrap();
        assert_eq!(tied.auc, 0.5);
    }

    #[test]
    fn entropy_closed_forms() {
        let d = Dims::new(4, 1, 1);
        let one = LabelVolume::new(d, 1.0, 2, vec![1, 1, 0, 1]).unwrap();
        assert_eq!(segmentation_entropy(&one).unwrap(), 0.0);
        let two = LabelVolume::new(d, 1.0, 2, vec![1, 2, 1, 2]).unwrap();
        assert_eq!(segmentation_entropy(&two).unwrap(), 1.0);
        let three = LabelVolume::new(d, 1.0, 3, vec![1, 2, 1, 3]).unwrap();
        assert_eq!(segmentation_entropy(&three).unwrap(), 1.5);
        let none = LabelVolume::new(d, 1.0, 3, vec![0; 4]).unwrap();
        assert!(segmentation_entropy(&none).is_err());
    }
}
