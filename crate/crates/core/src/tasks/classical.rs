//! Gaussian naive Bayes, logistic regression and a linear SVM over fixed
//! feature vectors.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::losses::sigmoid;
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalKind {
    /// Gaussian naive Bayes.
    Nbm,
    /// Logistic regression.
    Lr,
    /// Linear SVM (hinge loss with an L2 penalty).
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty for the SVM.
    pub l2: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            epochs: 500,
            learning_rate: 0.5,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    NaiveBayes {
        log_prior: [f64; 2],
        mean: [Array1<f64>; 2],
        var: [Array1<f64>; 2],
    },
    Linear {
        kind: ClassicalKind,
        weight: Array1<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FittedClassifier {
    pub classifier: Classifier,
    pub train_accuracy: f64,
}

fn stack(vectors: &[Array1<f64>]) -> Result<Array2<f64>> {
    let dim = vectors.first().map_or(0, |v| v.len());
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::input("feature vectors differ in length"));
    }
    let mut x = Array2::zeros((vectors.len(), dim));
    for (mut row, v) in x.axis_iter_mut(Axis(0)).zip(vectors) {
        row.assign(v);
    }
    Ok(x)
}

/// Fits a binary classifier on `labels ∈ {0, 1}`.
pub fn classical_fit(
    kind: ClassicalKind,
    vectors: &[Array1<f64>],
    labels: &[usize],
    cfg: &ClassicalConfig,
) -> Result<FittedClassifier> {
    if vectors.len() != labels.len() {
        return Err(Error::input("vectors and labels differ in length"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::input("labels must be 0 or 1"));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::input("training set must contain both classes"));
    }
    let x = stack(vectors)?;
    let classifier = match kind {
        ClassicalKind::Nbm => fit_naive_bayes(&x, labels),
        ClassicalKind::Lr | ClassicalKind::Svm => fit_linear(kind, &x, labels, cfg),
    };
    let correct = vectors
        .iter()
        .zip(labels)
        .filter(|(v, &y)| classical_predict(&classifier, v.view()) == y)
        .count();
    Ok(FittedClassifier {
        classifier,
        train_accuracy: correct as f64 / labels.len() as f64,
    })
}

fn fit_naive_bayes(x: &Array2<f64>, labels: &[usize]) -> Classifier {
    let n = labels.len() as f64;
    let dim = x.ncols();
    let mut mean = [Array1::zeros(dim), Array1::zeros(dim)];
    let mut var = [Array1::zeros(dim), Array1::zeros(dim)];
    let mut log_prior = [0.0; 2];
    for c in 0..2 {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let nc = rows.len() as f64;
        log_prior[c] = (nc / n).ln();
        for &i in &rows {
            mean[c] += &x.row(i);
        }
        mean[c] /= nc;
        for &i in &rows {
            let diff = &x.row(i) - &mean[c];
            var[c] += &(&diff * &diff);
        }
        var[c] /= nc;
        var[c].mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    }
    Classifier::NaiveBayes {
        log_prior,
        mean,
        var,
    }
}

fn fit_linear(kind: ClassicalKind, x: &Array2<f64>, labels: &[usize], cfg: &ClassicalConfig) -> Classifier {
    let n = x.nrows() as f64;
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let margins = x.dot(&w) + b;
        // derivative of the mean loss with respect to each margin
        let dz: Array1<f64> = match kind {
            ClassicalKind::Lr => margins
                .iter()
                .zip(labels)
                .map(|(&z, &y)| (sigmoid(z) - y as f64) / n)
                .collect(),
            _ => margins
                .iter()
                .zip(labels)
                .map(|(&z, &y)| {
                    let s = if y == 1 { 1.0 } else { -1.0 };
                    if s * z < 1.0 {
                        -s / n
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let mut gw = x.t().dot(&dz);
        if kind == ClassicalKind::Svm {
            gw.scaled_add(cfg.l2, &w);
        }
        w.scaled_add(-cfg.learning_rate, &gw);
        b -= cfg.learning_rate * dz.sum();
    }
    Classifier::Linear { kind, weight: w, bias: b }
}

/// Predicted class in {0, 1}.
pub fn classical_predict(classifier: &Classifier, v: ArrayView1<f64>) -> usize {
    match classifier {
        Classifier::NaiveBayes {
            log_prior,
            mean,
            var,
        } => {
            let score = |c: usize| {
                let mut s = log_prior[c];
                for ((&x, &m), &vv) in v.iter().zip(&mean[c]).zip(&var[c]) {
                    s -= 0.5 * ((2.0 * std::f64::consts::PI * vv).ln() + (x - m) * (x - m) / vv);
                }
                s
            };
            usize::from(score(1) > score(0))
        }
        Classifier::Linear { weight, bias, .. } => usize::from(v.dot(weight) + bias > 0.0),
    }
}
