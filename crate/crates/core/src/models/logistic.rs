//! Multinomial logistic regression with an L2 penalty, fitted by SAGA.
//!
//! Objective over `n` rows and `K` classes:
//!
//! ```text
//! F(W, b) = (1/n) Σ_i [ logsumexp(W x_i + b) − (W x_i + b)_{y_i} ] + (λ/2) ‖W‖²,   λ = 1 / (C n)
//! ```
//!
//! which is the usual `C Σ loss + ½‖W‖²` scaled by `1/(C n)`. The intercept
//! is not penalised.
//!
//! The solver touches only the nonzero columns of each row. The dense parts
//! of a SAGA step (the averaged gradient and the L2 shrinkage) are applied
//! lazily: weights are stored as `scale · u`, and a running sum of
//! `η / scale` lets a column catch up on every skipped step the next time a
//! row uses it. An epoch that raises the full objective is rolled back and
//! retried with half the step size, so the recorded loss never increases.

#![allow(clippy::needless_range_loop)]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseRows;
use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once an accepted epoch lowers the objective by at most this much.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            max_epochs: 2000,
            tol: 1e-6,
        }
    }
}

/// Per-class weight vectors and intercepts for a linear multiclass model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearWeights {
    pub n_classes: usize,
    pub n_features: usize,
    /// Class-major: `weights[k * n_features + f]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearWeights {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn class_weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n_features..(k + 1) * self.n_features]
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| {
                let w = self.class_weights(k);
                let mut s = self.bias[k];
                for (f, &v) in x.iter().enumerate() {
                    if v != 0.0 {
                        s += w[f] * v;
                    }
                }
                s
            })
            .collect()
    }

    /// Highest-scoring class; ties go to the lower index.
    pub fn argmax(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn softmax(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.scores(x);
        softmax_in_place(&mut z);
        z
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn logsumexp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// The regularized training objective as a function of a flat parameter
/// vector `[W (class-major, K × V), b (K)]`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    rows: SparseRows,
    y: Vec<usize>,
    n_classes: usize,
    n_features: usize,
    lambda: f64,
}

impl LogisticObjective {
    /// Targets are class indices into the sorted distinct labels of `m`.
    pub fn new(m: &FeatureMatrix, c: f64) -> Self {
        let (classes, y) = super::targets(m);
        Self::with_targets(m, &y, classes.len(), c)
    }

    pub(crate) fn with_targets(m: &FeatureMatrix, y: &[usize], n_classes: usize, c: f64) -> Self {
        let n = m.n_rows().max(1) as f64;
        Self {
            rows: SparseRows::from_matrix(m),
            y: y.to_vec(),
            n_classes,
            n_features: m.n_cols(),
            lambda: 1.0 / (c * n),
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * self.n_features + self.n_classes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn logits(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let (k, v) = (self.n_classes, self.n_features);
        let (idx, vals) = self.rows.row(i);
        (0..k)
            .map(|c| {
                let w = &theta[c * v..(c + 1) * v];
                theta[k * v + c] + idx.iter().zip(vals).map(|(&f, &x)| w[f] * x).sum::<f64>()
            })
            .collect()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.n_params());
        let n = self.rows.len();
        let data: f64 = (0..n)
            .map(|i| {
                let z = self.logits(theta, i);
                logsumexp(&z) - z[self.y[i]]
            })
            .sum::<f64>()
            / n as f64;
        let wsq: f64 = theta[..self.n_classes * self.n_features].iter().map(|w| w * w).sum();
        data + 0.5 * self.lambda * wsq
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.n_params());
        let (k, v) = (self.n_classes, self.n_features);
        let n = self.rows.len();
        let mut g = vec![0.0; self.n_params()];
        for i in 0..n {
            let mut p = self.logits(theta, i);
            softmax_in_place(&mut p);
            p[self.y[i]] -= 1.0;
            let (idx, vals) = self.rows.row(i);
            for c in 0..k {
                let d = p[c] / n as f64;
                for (&f, &x) in idx.iter().zip(vals) {
                    g[c * v + f] += d * x;
                }
                g[k * v + c] += d;
            }
        }
        for (gw, w) in g[..k * v].iter_mut().zip(&theta[..k * v]) {
            *gw += self.lambda * w;
        }
        g
    }

    fn theta_of(&self, w: &LinearWeights) -> Vec<f64> {
        let mut t = w.weights.clone();
        t.extend_from_slice(&w.bias);
        t
    }
}

/// Result of a SAGA run.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: LinearWeights,
    /// Objective at the start and after every accepted epoch.
    pub loss_history: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// Mutable SAGA state. Weights are feature-major here (`u[f * K + k]`) so
/// a sparse row touches contiguous memory.
#[derive(Clone)]
struct SagaState {
    u: Vec<f64>,
    scale: f64,
    bias: Vec<f64>,
    grad_memory: Vec<f64>,
    avg_w: Vec<f64>,
    avg_b: Vec<f64>,
}

impl SagaState {
    fn weights(&self, k: usize, v: usize) -> LinearWeights {
        let mut w = LinearWeights::zeros(k, v);
        for f in 0..v {
            for c in 0..k {
                w.weights[c * v + f] = self.scale * self.u[f * k + c];
            }
        }
        w.bias.copy_from_slice(&self.bias);
        w
    }
}

/// Fits the model on `m` with class targets `y` in `0..n_classes`.
pub fn fit(m: &FeatureMatrix, y: &[usize], n_classes: usize, p: &LogisticParams, seed: u64) -> Result<LogisticFit> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if y.len() != m.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            actual: y.len(),
        });
    }
    let objective = LogisticObjective::with_targets(m, y, n_classes, p.c);
    let rows = &objective.rows;
    let (n, k, v) = (m.n_rows(), n_classes, m.n_cols());
    let lambda = objective.lambda;

    // Hessian of the softmax loss w.r.t. the logits is bounded by 1/2.
    let max_sq = (0..n)
        .map(|i| rows.row(i).1.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max);
    let lipschitz = 0.5 * (max_sq + 1.0) + lambda;
    let mut step = 1.0 / (3.0 * lipschitz);

    // Gradient memory initialised at W = 0, b = 0.
    let mut state = SagaState {
        u: vec![0.0; v * k],
        scale: 1.0,
        bias: vec![0.0; k],
        grad_memory: vec![0.0; n * k],
        avg_w: vec![0.0; v * k],
        avg_b: vec![0.0; k],
    };
    for i in 0..n {
        let g = &mut state.grad_memory[i * k..(i + 1) * k];
        for (c, gc) in g.iter_mut().enumerate() {
            *gc = 1.0 / k as f64 - if c == y[i] { 1.0 } else { 0.0 };
        }
        let (idx, vals) = rows.row(i);
        for (&f, &x) in idx.iter().zip(vals) {
            for c in 0..k {
                state.avg_w[f * k + c] += x * g[c] / n as f64;
            }
        }
        for c in 0..k {
            state.avg_b[c] += g[c] / n as f64;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss = objective.loss(&objective.theta_of(&state.weights(k, v)));
    let mut history = vec![loss];
    let mut converged = false;
    let mut epochs = 0;

    let mut cum = vec![0.0; n + 1];
    let mut last = vec![0usize; v];
    let mut logits = vec![0.0; k];
    let mut delta = vec![0.0; k];

    while epochs < p.max_epochs {
        epochs += 1;
        let snapshot = state.clone();
        order.shuffle(&mut rng);
        cum[0] = 0.0;
        last.iter_mut().for_each(|l| *l = 0);

        for (t, &i) in order.iter().enumerate() {
            let (idx, vals) = rows.row(i);
            for &f in idx {
                let lag = cum[t] - cum[last[f]];
                if lag != 0.0 {
                    for c in 0..k {
                        state.u[f * k + c] -= state.avg_w[f * k + c] * lag;
                    }
                }
                last[f] = t;
            }
            for c in 0..k {
                let mut z = 0.0;
                for (&f, &x) in idx.iter().zip(vals) {
                    z += state.u[f * k + c] * x;
                }
                logits[c] = state.scale * z + state.bias[c];
            }
            softmax_in_place(&mut logits);
            let mem = &mut state.grad_memory[i * k..(i + 1) * k];
            for c in 0..k {
                let g = logits[c] - if c == y[i] { 1.0 } else { 0.0 };
                delta[c] = g - mem[c];
                mem[c] = g;
            }

            // W ← (1 − ηλ) W − η (x_i ⊗ δ + A)
            state.scale *= 1.0 - step * lambda;
            let inv = step / state.scale;
            cum[t + 1] = cum[t] + inv;
            for (&f, &x) in idx.iter().zip(vals) {
                for c in 0..k {
                    let a = &mut state.avg_w[f * k + c];
                    state.u[f * k + c] -= inv * (x * delta[c] + *a);
                    *a += x * delta[c] / n as f64;
                }
                last[f] = t + 1;
            }
            for c in 0..k {
                state.bias[c] -= step * (delta[c] + state.avg_b[c]);
                state.avg_b[c] += delta[c] / n as f64;
            }

            if state.scale < 1e-9 {
                catch_up(&mut state, &cum, &mut last, t + 1, k);
                let s = state.scale;
                state.u.iter_mut().for_each(|w| *w *= s);
                state.scale = 1.0;
            }
        }
        catch_up(&mut state, &cum, &mut last, n, k);

        let next = objective.loss(&objective.theta_of(&state.weights(k, v)));
        if !next.is_finite() || next > loss {
            state = snapshot;
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
            continue;
        }
        let improvement = loss - next;
        loss = next;
        history.push(loss);
        if improvement <= p.tol {
            converged = true;
            break;
        }
    }

    Ok(LogisticFit {
        weights: state.weights(k, v),
        loss_history: history,
        epochs,
        converged,
    })
}

fn catch_up(state: &mut SagaState, cum: &[f64], last: &mut [usize], now: usize, k: usize) {
    for (f, l) in last.iter_mut().enumerate() {
        let lag = cum[now] - cum[*l];
        if lag != 0.0 {
            for c in 0..k {
                state.u[f * k + c] -= state.avg_w[f * k + c] * lag;
            }
        }
        *l = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use rand::Rng;

    fn random_problem(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = [Label::A, Label::F, Label::SE];
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 }).collect())
            .collect();
        let y = (0..rows).map(|i| labels[i % 3]).collect();
        FeatureMatrix::from_rows(&data, y).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = random_problem(5, 4, 7);
        let obj = LogisticObjective::new(&m, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..obj.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = obj.gradient(&theta);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (obj.loss(&tp) - obj.loss(&tm)) / (2.0 * h);
            let rel = (fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1e-8);
            assert!(rel < 1e-5, "param {j}: analytic {} vs fd {fd}", g[j]);
        }
    }

    #[test]
    fn loss_history_never_increases() {
        let m = random_problem(60, 8, 11);
        let (classes, y) = crate::models::targets(&m);
        let fit = fit(&m, &y, classes.len(), &LogisticParams::default(), 5).unwrap();
        assert!(fit.loss_history.len() > 2);
        for w in fit.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn saga_reaches_the_optimum() {
        // Gradient norm at the returned point should be small compared to
        // the starting gradient.
        let m = random_problem(40, 6, 2);
        let (classes, y) = crate::models::targets(&m);
        let p = LogisticParams {
            c: 1.0,
            max_epochs: 5000,
            tol: 1e-12,
        };
        let fit = fit(&m, &y, classes.len(), &p, 1).unwrap();
        let obj = LogisticObjective::new(&m, 1.0);
        let theta = obj.theta_of(&fit.weights);
        let g0: f64 = obj.gradient(&vec![0.0; obj.n_params()]).iter().map(|g| g * g).sum::<f64>().sqrt();
        let g: f64 = obj.gradient(&theta).iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(g < 1e-4 * g0, "gradient norm {g} vs initial {g0}");
    }

    #[test]
    fn separable_points_fit_exactly() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![Label::F, Label::SE]).unwrap();
        let model = crate::models::train(&crate::models::ModelSpec::logistic_regression(), &m, 0).unwrap();
        assert_eq!(crate::models::predict(&model, &m).unwrap(), vec![Label::F, Label::SE]);
    }

    #[test]
    fn symmetric_problem_gives_even_odds_at_midpoint() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![Label::F, Label::SE]).unwrap();
        let spec = crate::models::ModelSpec::LogisticRegression(LogisticParams {
            c: 10.0,
            max_epochs: 20_000,
            tol: 1e-14,
        });
        let model = crate::models::train(&spec, &m, 0).unwrap();
        let mid = FeatureMatrix::from_rows(&[vec![0.5, 0.5]], vec![Label::F]).unwrap();
        let p = crate::models::predict_proba(&model, &mid).unwrap();
        assert!((p[0][0] - 0.5).abs() < 1e-6, "{:?}", p);
        assert!((p[0][0] + p[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitting_is_reproducible() {
        let m = random_problem(30, 5, 9);
        let (classes, y) = crate::models::targets(&m);
        let a = fit(&m, &y, classes.len(), &LogisticParams::default(), 4).unwrap();
        let b = fit(&m, &y, classes.len(), &LogisticParams::default(), 4).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.loss_history, b.loss_history);
    }
}
