use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `exp(-|x - z|^2 / sigma2)`
    #[default]
    Rbf,
    /// `x · z`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LssvmParams {
    /// Regularisation; the Gram diagonal is loaded with `1 / gamma`.
    pub gamma: f64,
    pub sigma2: f64,
    pub kernel: KernelKind,
    /// Standardise each feature to zero mean and unit variance before training.
    pub standardize: bool,
}

impl Default for LssvmParams {
    fn default() -> Self {
        LssvmParams {
            gamma: 10.0,
            sigma2: 36.0,
            kernel: KernelKind::Rbf,
            standardize: true,
        }
    }
}

impl LssvmParams {
    pub fn new(gamma: f64, sigma2: f64) -> Self {
        LssvmParams {
            gamma,
            sigma2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.kernel == KernelKind::Rbf && !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be > 0, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
                (-d2 / self.sigma2).exp()
            }
            KernelKind::Linear => a.iter().zip(b).map(|(x, z)| x * z).sum(),
        }
    }
}

/// Per-feature affine map to zero mean and unit variance. Constant features
/// map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Scaler {
    pub fn fit(f: &FeatureMatrix) -> Self {
        let n = f.len() as f64;
        let w = f.width();
        let mut mean = vec![0.0; w];
        for i in 0..f.len() {
            for (m, x) in mean.iter_mut().zip(f.row(i)) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; w];
        for i in 0..f.len() {
            for ((v, x), m) in var.iter_mut().zip(f.row(i)).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let inv_std = var
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })
            .collect();
        Scaler { mean, inv_std }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().zip(&self.mean).zip(&self.inv_std).map(|((v, m), s)| (v - m) * s));
    }
}

/// One class-pair machine: `f(x) = Σ alpha_i K(x, x_i) + bias`, positive for
/// `positive`, negative for `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: u8,
    pub negative: u8,
    /// Rows of the support set used by this machine.
    pub members: Vec<usize>,
    /// `+1` / `-1` per member.
    pub targets: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// `|A z - r| / |r|` of the bordered system after solving.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LssvmModel {
    pub params: LssvmParams,
    pub classes: Vec<u8>,
    pub width: usize,
    pub scaler: Option<Scaler>,
    /// Every training vector after scaling, row-major.
    pub support: Vec<f64>,
    pub machines: Vec<BinaryMachine>,
}

/// Trains one machine per class pair on the complete training set.
pub fn train_lssvm(f: &FeatureMatrix, params: &LssvmParams) -> Result<LssvmModel> {
    params.validate()?;
    let classes = f.classes();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "training needs at least two classes, found {}",
            classes.len()
        )));
    }
    let scaler = params.standardize.then(|| Scaler::fit(f));
    let mut support = Vec::with_capacity(f.len() * f.width());
    let mut buf = Vec::new();
    for i in 0..f.len() {
        match &scaler {
            Some(s) => {
                s.apply(f.row(i), &mut buf);
                support.extend_from_slice(&buf);
            }
            None => support.extend_from_slice(f.row(i)),
        }
    }
    let w = f.width();
    let row = |i: usize| &support[i * w..(i + 1) * w];
    let mut machines = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            let members: Vec<usize> = (0..f.len())
                .filter(|&i| f.labels()[i] == pos || f.labels()[i] == neg)
                .collect();
            let targets: Vec<f64> = members
                .iter()
                .map(|&i| if f.labels()[i] == pos { 1.0 } else { -1.0 })
                .collect();
            let gram = DMatrix::from_fn(members.len(), members.len(), |r, c| {
                params.kernel(row(members[r]), row(members[c]))
            });
            let (alphas, bias, residual) = solve_bordered(gram, &targets, params.gamma, pos, neg)?;
            machines.push(BinaryMachine {
                positive: pos,
                negative: neg,
                members,
                targets,
                alphas,
                bias,
                residual,
            });
        }
    }
    Ok(LssvmModel {
        params: *params,
        classes,
        width: w,
        scaler,
        support,
        machines,
    })
}

/// Solves `[0 1ᵀ; 1 K + I/γ] [b; α] = [0; y]` by a Cholesky factorisation of
/// the lower-right block and elimination of the border.
fn solve_bordered(
    gram: DMatrix<f64>,
    y: &[f64],
    gamma: f64,
    pos: u8,
    neg: u8,
) -> Result<(Vec<f64>, f64, f64)> {
    let n = y.len();
    let mut h = gram.clone();
    for i in 0..n {
        h[(i, i)] += 1.0 / gamma;
    }
    let chol = h.clone().cholesky().ok_or_else(|| {
        Error::Conditioning(format!(
            "kernel system for classes {pos}/{neg} is not positive definite; \
             increase the regularisation 1/gamma"
        ))
    })?;
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let eta = chol.solve(&ones);
    let nu = chol.solve(&yv);
    let denom = ones.dot(&eta);
    if !(denom.abs() > f64::EPSILON) || !denom.is_finite() {
        return Err(Error::Conditioning(format!(
            "bias equation for classes {pos}/{neg} is singular; increase the regularisation 1/gamma"
        )));
    }
    let bias = ones.dot(&nu) / denom;
    let alpha = nu - eta * bias;
    let first = alpha.sum();
    let rest = &h * &alpha + DVector::from_element(n, bias) - &yv;
    let residual = (first * first + rest.norm_squared()).sqrt() / yv.norm();
    if !residual.is_finite() || residual > 1e-6 {
        return Err(Error::Conditioning(format!(
            "kernel system for classes {pos}/{neg} solved with relative residual {residual:.2e}; \
             increase the regularisation 1/gamma"
        )));
    }
    Ok((alpha.as_slice().to_vec(), bias, residual))
}

impl LssvmModel {
    pub fn support_row(&self, i: usize) -> &[f64] {
        &self.support[i * self.width..(i + 1) * self.width]
    }

    fn prepare(&self, x: &[f64], buf: &mut Vec<f64>) {
        match &self.scaler {
            Some(s) => s.apply(x, buf),
            None => {
                buf.clear();
                buf.extend_from_slice(x);
            }
        }
    }

    /// Decision value of every machine, in `machines` order.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.width);
        self.prepare(x, &mut buf);
        let n = self.support.len() / self.width.max(1);
        let k: Vec<f64> = (0..n).map(|i| self.params.kernel(&buf, self.support_row(i))).collect();
        self.machines
            .iter()
            .map(|m| m.members.iter().zip(&m.alphas).map(|(&i, a)| a * k[i]).sum::<f64>() + m.bias)
            .collect()
    }

    /// One-vs-one vote; ties go to the class with the larger summed margin,
    /// then to the lower class id.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let dv = self.decision_values(x);
        let mut votes = vec![0usize; self.classes.len()];
        let mut margin = vec![0.0; self.classes.len()];
        let pos_of = |c: u8| self.classes.iter().position(|&k| k == c).unwrap();
        for (m, &v) in self.machines.iter().zip(&dv) {
            let winner = if v >= 0.0 { m.positive } else { m.negative };
            let w = pos_of(winner);
            votes[w] += 1;
            margin[w] += v.abs();
        }
        let mut best = 0;
        for c in 1..self.classes.len() {
            if votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best]) {
                best = c;
            }
        }
        self.classes[best]
    }
}
