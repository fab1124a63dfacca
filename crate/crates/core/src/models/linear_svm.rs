//! One-vs-rest linear SVM (hinge loss, L2 penalty) trained by dual
//! coordinate descent.
//!
//! Each binary problem minimises
//! `½ (‖w‖² + b²) + C Σ_i max(0, 1 − y_i (w·x_i + b))`; the intercept is an
//! extra constant feature and is penalised along with `w`. Prediction takes
//! the class with the largest margin score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::LinearWeights;
use crate::sparse::SparseRows;
use crate::vectorizer::FeatureMatrix;

/// Stopping threshold on the spread of projected dual gradients.
const DUAL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_epochs: 1000 }
    }
}

/// Primal objective of the binary problem for class `k` (others are −1).
pub fn primal_objective(m: &FeatureMatrix, y: &[usize], k: usize, w: &[f64], b: f64, c: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = m
        .rows()
        .zip(y)
        .map(|(x, &yi)| {
            let sign = if yi == k { 1.0 } else { -1.0 };
            let score = b + x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (1.0 - sign * score).max(0.0)
        })
        .sum();
    reg + c * hinge
}

fn fit_binary(rows: &SparseRows, signs: &[f64], n_features: usize, p: &SvmParams, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = rows.len();
    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qdiag: Vec<f64> = (0..n)
        .map(|i| rows.row(i).1.iter().map(|x| x * x).sum::<f64>() + 1.0)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..p.max_epochs {
        order.shuffle(rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let (idx, vals) = rows.row(i);
            let yi = signs[i];
            let score = b + idx.iter().zip(vals).map(|(&f, &x)| w[f] * x).sum::<f64>();
            let g = yi * score - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == p.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qdiag[i]).clamp(0.0, p.c);
                let d = (alpha[i] - old) * yi;
                if d != 0.0 {
                    for (&f, &x) in idx.iter().zip(vals) {
                        w[f] += d * x;
                    }
                    b += d;
                }
            }
        }
        if pg_max - pg_min <= DUAL_TOL {
            break;
        }
    }
    (w, b)
}

pub(crate) fn fit(m: &FeatureMatrix, y: &[usize], n_classes: usize, p: &SvmParams, seed: u64) -> LinearWeights {
    let rows = SparseRows::from_matrix(m);
    let v = m.n_cols();
    let mut out = LinearWeights::zeros(n_classes, v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_classes {
        let signs: Vec<f64> = y.iter().map(|&yi| if yi == k { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_binary(&rows, &signs, v, p, &mut rng);
        out.weights[k * v..(k + 1) * v].copy_from_slice(&w);
        out.bias[k] = b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::models::{predict, targets, train, ModelSpec};
    use rand::Rng;

    #[test]
    fn objective_decreases_from_initialisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels: Vec<Label> = (0..80).map(|i| [Label::F, Label::US, Label::PE][i % 3]).collect();
        let m = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let (classes, y) = targets(&m);
        let p = SvmParams::default();
        let w = fit(&m, &y, classes.len(), &p, 3);
        for k in 0..classes.len() {
            let init = primal_objective(&m, &y, k, &[0.0; 6], 0.0, p.c);
            let fin = primal_objective(&m, &y, k, w.class_weights(k), w.bias[k], p.c);
            assert!(fin <= init, "class {k}: {fin} > {init}");
        }
    }

    #[test]
    fn separable_data_is_fit() {
        let m = FeatureMatrix::from_rows(
            &[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]],
            vec![Label::F, Label::F, Label::SE, Label::SE],
        )
        .unwrap();
        let model = train(&ModelSpec::linear_svm(), &m, 0).unwrap();
        assert_eq!(predict(&model, &m).unwrap(), m.labels());
    }
}
