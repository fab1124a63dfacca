//! Multinomial naive Bayes with additive (Laplace) smoothing. Feature values
//! are used as fractional term counts.

use serde::{Deserialize, Serialize};

use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    pub alpha: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub class_log_prior: Vec<f64>,
    /// Class-major `log P(term | class)`.
    pub feature_log_prob: Vec<f64>,
    pub n_features: usize,
}

impl NaiveBayesModel {
    fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        let v = self.n_features;
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(k, &prior)| {
                let lp = &self.feature_log_prob[k * v..(k + 1) * v];
                prior
                    + x.iter()
                        .zip(lp)
                        .filter(|(&xf, _)| xf != 0.0)
                        .map(|(&xf, &l)| xf * l)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> usize {
        super::logistic::argmax(&self.joint_log_likelihood(x))
    }

    pub fn proba_row(&self, x: &[f64]) -> Vec<f64> {
        let jll = self.joint_log_likelihood(x);
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = jll.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / sum).collect()
    }
}

pub(crate) fn fit(m: &FeatureMatrix, y: &[usize], n_classes: usize, p: &NaiveBayesParams) -> NaiveBayesModel {
    let v = m.n_cols();
    let mut class_count = vec![0usize; n_classes];
    let mut feature_count = vec![0.0; n_classes * v];
    for (x, &k) in m.rows().zip(y) {
        class_count[k] += 1;
        for (acc, &xf) in feature_count[k * v..(k + 1) * v].iter_mut().zip(x) {
            *acc += xf;
        }
    }
    let n = m.n_rows() as f64;
    let class_log_prior = class_count.iter().map(|&c| (c as f64 / n).ln()).collect();
    let mut feature_log_prob = vec![0.0; n_classes * v];
    for k in 0..n_classes {
        let counts = &feature_count[k * v..(k + 1) * v];
        let total: f64 = counts.iter().sum::<f64>() + p.alpha * v as f64;
        for (out, &c) in feature_log_prob[k * v..(k + 1) * v].iter_mut().zip(counts) {
            *out = ((c + p.alpha) / total).ln();
        }
    }
    NaiveBayesModel {
        class_log_prior,
        feature_log_prob,
        n_features: v,
    }
}
