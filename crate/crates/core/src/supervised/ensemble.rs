use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::tree::{argmax, DecisionTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleMethod {
    #[default]
    Bagging,
    AdaBoost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleParams {
    pub method: EnsembleMethod,
    pub n_learners: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Bagging only: draw bootstrap resamples. When off every learner sees
    /// the full training set.
    pub bootstrap: bool,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            method: EnsembleMethod::Bagging,
            n_learners: 50,
            max_depth: 3,
            seed: 42,
            bootstrap: true,
        }
    }
}

impl EnsembleParams {
    pub fn new(method: EnsembleMethod, n_learners: usize, max_depth: usize) -> Self {
        EnsembleParams {
            method,
            n_learners,
            max_depth,
            ..Default::default()
        }
    }
}

/// Diagnostics of one accepted boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    /// Normalised sample weights the learner was fitted on.
    pub weights: Vec<f64>,
    /// Whether the learner misclassified each training sample.
    pub missed: Vec<bool>,
    pub error: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub method: EnsembleMethod,
    pub classes: Vec<u8>,
    pub trees: Vec<DecisionTree>,
    /// Vote weight per tree (all 1 for bagging).
    pub learner_weights: Vec<f64>,
    #[serde(skip)]
    pub boost_trace: Vec<BoostRound>,
}

pub fn train_ensemble(f: &FeatureMatrix, p: &EnsembleParams) -> Result<EnsembleModel> {
    if p.n_learners < 1 {
        return Err(Error::InvalidParameter("n_learners must be >= 1".into()));
    }
    let classes = f.classes();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "training needs at least two classes, found {}",
            classes.len()
        )));
    }
    let class_idx: Vec<usize> = f
        .labels()
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    match p.method {
        EnsembleMethod::Bagging => Ok(bagging(f, &class_idx, classes, p)),
        EnsembleMethod::AdaBoost => samme(f, &class_idx, classes, p),
    }
}

fn bagging(f: &FeatureMatrix, class_idx: &[usize], classes: Vec<u8>, p: &EnsembleParams) -> EnsembleModel {
    let n = f.len();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut trees = Vec::with_capacity(p.n_learners);
    for _ in 0..p.n_learners {
        // multiplicities of a size-n resample stand in for duplicated rows
        let mut counts = vec![0.0; n];
        if p.bootstrap {
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
        } else {
            counts.iter_mut().for_each(|c| *c = 1.0);
        }
        trees.push(DecisionTree::fit(f, class_idx, &counts, classes.len(), p.max_depth));
    }
    EnsembleModel {
        method: EnsembleMethod::Bagging,
        learner_weights: vec![1.0; trees.len()],
        classes,
        trees,
        boost_trace: Vec::new(),
    }
}

fn samme(f: &FeatureMatrix, class_idx: &[usize], classes: Vec<u8>, p: &EnsembleParams) -> Result<EnsembleModel> {
    let n = f.len();
    let k = classes.len() as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..p.n_learners {
        let tree = DecisionTree::fit(f, class_idx, &w, classes.len(), p.max_depth);
        let missed: Vec<bool> = (0..n).map(|i| tree.predict(f.row(i)) != class_idx[i]).collect();
        let err: f64 = w.iter().zip(&missed).filter(|(_, &m)| m).map(|(x, _)| x).sum();
        if err >= 1.0 - 1.0 / k {
            break;
        }
        let alpha = ((1.0 - err) / err.max(1e-10)).ln() + (k - 1.0).ln();
        trace.push(BoostRound {
            weights: w.clone(),
            missed: missed.clone(),
            error: err,
            alpha,
        });
        trees.push(tree);
        alphas.push(alpha);
        if err == 0.0 {
            break;
        }
        for (wi, &m) in w.iter_mut().zip(&missed) {
            if m {
                *wi *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
    }
    if trees.is_empty() {
        return Err(Error::Model(
            "no boosting round beat chance on the weighted training data".into(),
        ));
    }
    Ok(EnsembleModel {
        method: EnsembleMethod::AdaBoost,
        classes,
        trees,
        learner_weights: alphas,
        boost_trace: trace,
    })
}

impl EnsembleModel {
    /// Weighted vote; ties go to the lower class id.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut votes = vec![0.0; self.classes.len()];
        for (t, w) in self.trees.iter().zip(&self.learner_weights) {
            votes[t.predict(x)] += w;
        }
        self.classes[argmax(&votes)]
    }
}
