//! The five classifiers behind one train / predict interface.

pub mod knn;
pub mod linear_svm;
pub mod logistic;
pub mod naive_bayes;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::vectorizer::{FeatureMatrix, Vocabulary};

pub use knn::KnnParams;
pub use linear_svm::SvmParams;
pub use logistic::LogisticParams;
pub use naive_bayes::NaiveBayesParams;
pub use tree::TreeParams;

/// Model kind plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    LogisticRegression(LogisticParams),
    LinearSvm(SvmParams),
    MultinomialNb(NaiveBayesParams),
    Knn(KnnParams),
    DecisionTree(TreeParams),
}

impl ModelSpec {
    pub fn logistic_regression() -> Self {
        ModelSpec::LogisticRegression(LogisticParams::default())
    }

    pub fn linear_svm() -> Self {
        ModelSpec::LinearSvm(SvmParams::default())
    }

    pub fn multinomial_nb() -> Self {
        ModelSpec::MultinomialNb(NaiveBayesParams::default())
    }

    pub fn knn(k: usize) -> Self {
        ModelSpec::Knn(KnnParams { k })
    }

    pub fn decision_tree() -> Self {
        ModelSpec::DecisionTree(TreeParams::default())
    }

    /// Every in-scope model with default hyperparameters, in report order.
    pub fn all() -> Vec<ModelSpec> {
        vec![
            Self::decision_tree(),
            Self::linear_svm(),
            Self::multinomial_nb(),
            Self::logistic_regression(),
            Self::knn(3),
            Self::knn(5),
            Self::knn(7),
        ]
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression(_) => "logistic_regression",
            ModelSpec::LinearSvm(_) => "linear_svm",
            ModelSpec::MultinomialNb(_) => "multinomial_nb",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::DecisionTree(_) => "decision_tree",
        }
    }

    /// Short identifier used on the command line and in CSV output.
    pub fn id(&self) -> String {
        match self {
            ModelSpec::LogisticRegression(_) => "lr".into(),
            ModelSpec::LinearSvm(_) => "svm".into(),
            ModelSpec::MultinomialNb(_) => "nb".into(),
            ModelSpec::Knn(p) => format!("knn{}", p.k),
            ModelSpec::DecisionTree(_) => "dt".into(),
        }
    }

    /// Row name used in result tables.
    pub fn display_name(&self) -> String {
        match self {
            ModelSpec::LogisticRegression(_) => "Logistic Regression".into(),
            ModelSpec::LinearSvm(_) => "SVM (Linear)".into(),
            ModelSpec::MultinomialNb(_) => "Naive Bayes".into(),
            ModelSpec::Knn(p) => format!("KNN (k={})", p.k),
            ModelSpec::DecisionTree(_) => "Decision Tree".into(),
        }
    }

    /// Parses `lr`, `svm`, `nb`, `dt`, `knn3`/`knn5`/`knn7` (or `knn=<k>`).
    pub fn from_id(id: &str) -> Result<Self> {
        let id = id.trim().to_ascii_lowercase();
        let spec = match id.as_str() {
            "lr" | "logistic_regression" => Self::logistic_regression(),
            "svm" | "linear_svm" => Self::linear_svm(),
            "nb" | "multinomial_nb" => Self::multinomial_nb(),
            "dt" | "decision_tree" => Self::decision_tree(),
            other => {
                let k = other
                    .strip_prefix("knn")
                    .map(|s| s.trim_start_matches(['=', '-', '_']))
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown model `{other}`")))?;
                Self::knn(k)
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            ModelSpec::LogisticRegression(p) => {
                if !(p.c > 0.0 && p.c.is_finite()) {
                    return bad("logistic regression C must be > 0");
                }
                if p.max_epochs == 0 || p.tol.is_nan() || p.tol < 0.0 {
                    return bad("logistic regression needs max_epochs >= 1 and tol >= 0");
                }
            }
            ModelSpec::LinearSvm(p) => {
                if !(p.c > 0.0 && p.c.is_finite()) || p.max_epochs == 0 {
                    return bad("linear SVM needs C > 0 and max_epochs >= 1");
                }
            }
            ModelSpec::MultinomialNb(p) => {
                if !(p.alpha > 0.0 && p.alpha.is_finite()) {
                    return bad("naive Bayes alpha must be > 0");
                }
            }
            ModelSpec::Knn(p) => {
                if p.k == 0 || p.k % 2 == 0 {
                    return bad("KNN k must be odd and >= 1");
                }
            }
            ModelSpec::DecisionTree(p) => {
                if p.max_depth == 0 || p.min_samples_split < 2 {
                    return bad("decision tree needs max_depth >= 1 and min_samples_split >= 2");
                }
            }
        }
        Ok(())
    }

    fn is_discriminative(&self) -> bool {
        matches!(self, ModelSpec::LogisticRegression(_) | ModelSpec::LinearSvm(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedParams {
    Logistic(logistic::LinearWeights),
    LinearSvm(logistic::LinearWeights),
    MultinomialNb(naive_bayes::NaiveBayesModel),
    Knn(knn::KnnIndex),
    DecisionTree(tree::Tree),
}

/// A fitted classifier. `classes` is sorted by label code; every per-class
/// array in `params` follows that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub classes: Vec<Label>,
    pub n_features: usize,
    pub params: FittedParams,
}

impl TrainedModel {
    fn check_width(&self, m: &FeatureMatrix) -> Result<()> {
        if m.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: m.n_cols(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Sorted distinct labels of `m` and the class index of every row.
pub fn targets(m: &FeatureMatrix) -> (Vec<Label>, Vec<usize>) {
    let classes: Vec<Label> = m.class_counts().into_keys().collect();
    let y = m
        .labels()
        .iter()
        .map(|l| classes.binary_search(l).expect("label collected from the same matrix"))
        .collect();
    (classes, y)
}

/// Fits `spec` on `m`. `seed` drives every stochastic choice the solver
/// makes, so equal inputs give bit-identical models.
pub fn train(spec: &ModelSpec, m: &FeatureMatrix, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (classes, y) = targets(m);
    if classes.len() < 2 && spec.is_discriminative() {
        return Err(Error::SingleClassTraining(classes[0]));
    }
    let params = match spec {
        ModelSpec::LogisticRegression(p) => {
            FittedParams::Logistic(logistic::fit(m, &y, classes.len(), p, seed)?.weights)
        }
        ModelSpec::LinearSvm(p) => FittedParams::LinearSvm(linear_svm::fit(m, &y, classes.len(), p, seed)),
        ModelSpec::MultinomialNb(p) => FittedParams::MultinomialNb(naive_bayes::fit(m, &y, classes.len(), p)),
        ModelSpec::Knn(p) => FittedParams::Knn(knn::fit(m, &y, p)),
        ModelSpec::DecisionTree(p) => FittedParams::DecisionTree(tree::fit(m, &y, classes.len(), p)),
    };
    Ok(TrainedModel {
        spec: *spec,
        classes,
        n_features: m.n_cols(),
        params,
    })
}

/// One predicted label per row.
pub fn predict(model: &TrainedModel, m: &FeatureMatrix) -> Result<Vec<Label>> {
    model.check_width(m)?;
    let idx: Vec<usize> = match &model.params {
        FittedParams::Logistic(w) | FittedParams::LinearSvm(w) => m.rows().map(|r| w.argmax(r)).collect(),
        FittedParams::MultinomialNb(nb) => m.rows().map(|r| nb.predict_row(r)).collect(),
        FittedParams::Knn(index) => m.rows().map(|r| index.predict_row(r, model.classes.len())).collect(),
        FittedParams::DecisionTree(t) => m.rows().map(|r| t.predict_row(r)).collect(),
    };
    Ok(idx.into_iter().map(|i| model.classes[i]).collect())
}

/// Class probabilities, one row per input row, columns in `model.classes`
/// order.
pub fn predict_proba(model: &TrainedModel, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    model.check_width(m)?;
    match &model.params {
        FittedParams::Logistic(w) => Ok(m.rows().map(|r| w.softmax(r)).collect()),
        FittedParams::MultinomialNb(nb) => Ok(m.rows().map(|r| nb.proba_row(r)).collect()),
        _ => Err(Error::UnsupportedModel {
            operation: "predict_proba",
            kind: model.spec.kind(),
        }),
    }
}

/// For every class, the `n` terms with the largest positive logistic
/// regression coefficients, largest first.
pub fn top_features(model: &TrainedModel, vocab: &Vocabulary, n: usize) -> Result<BTreeMap<Label, Vec<(String, f64)>>> {
    let FittedParams::Logistic(w) = &model.params else {
        return Err(Error::UnsupportedModel {
            operation: "top_features",
            kind: model.spec.kind(),
        });
    };
    if vocab.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: vocab.len(),
        });
    }
    let mut out = BTreeMap::new();
    for (k, &label) in model.classes.iter().enumerate() {
        let coefs = w.class_weights(k);
        let mut ranked: Vec<(usize, f64)> = coefs.iter().copied().enumerate().filter(|&(_, c)| c > 0.0).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        let terms = ranked
            .into_iter()
            .map(|(c, wt)| (vocab.terms()[c].clone(), wt))
            .collect();
        out.insert(label, terms);
    }
    Ok(out)
}
