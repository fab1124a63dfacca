//! Stratified cross-validation around the full pipeline.
//!
//! Every fold refits the vectorizer on its training rows alone, resamples
//! only the transformed training rows, and scores each model on the
//! untouched validation rows. Per-fold seeds are `seed ^ fold`, so folds
//! can run in any order or in parallel and still give the same report.

use std::io::Write;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{class_distribution, Dataset, Label};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, confusion_matrix, metrics, AggregateReport, MetricsReport};
use crate::models::{predict, train, ModelSpec, TrainedModel};
use crate::resampler::{resample, ResampleMode, ResampleReport, SmoteParams};
use crate::vectorizer::{self, FeatureMatrix, TfidfConfig, Vocabulary};

pub const REPORT_VERSION: u32 = 1;

/// A K-way partition of row indices; each fold is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl CvPlan {
    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every row outside `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config("K must be ≥ 2".into()));
    }
    Ok(())
}

/// Shuffles each class's rows (classes in label order, one RNG stream) and
/// deals them round-robin. The fold pointer carries over from one class to
/// the next, which keeps fold sizes within one row of each other.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<CvPlan> {
    check_k(k)?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut by_class: std::collections::BTreeMap<Label, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((&label, rows)) = by_class.iter().find(|(_, rows)| rows.len() < k) {
        return Err(Error::ClassTooSmall {
            label,
            count: rows.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(CvPlan { k, seed, folds })
}

/// What to run. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub models: Vec<ModelSpec>,
    pub resample: ResampleMode,
    pub k: usize,
    pub seed: u64,
    pub tfidf: TfidfConfig,
    /// SMOTE neighbourhood size. The SMOTE seed is derived per fold.
    pub smote_k_neighbors: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelSpec::logistic_regression()],
            resample: ResampleMode::SmoteTomek,
            k: 10,
            seed: 42,
            tfidf: TfidfConfig::default(),
            smote_k_neighbors: SmoteParams::default().k_neighbors,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_k(self.k)?;
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.smote_k_neighbors == 0 {
            return Err(Error::Config("SMOTE k_neighbors must be ≥ 1".into()));
        }
        if self.tfidf.min_df == 0 {
            return Err(Error::Config("min_df must be ≥ 1".into()));
        }
        for m in &self.models {
            m.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn smote_params(&self, seed: u64) -> SmoteParams {
        SmoteParams {
            k_neighbors: self.smote_k_neighbors,
            seed,
        }
    }
}

/// Seed used for resampling and model fitting in fold `fold`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ fold as u64
}

/// Everything built for one fold before any model is trained.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: usize,
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    /// Vocabulary fitted on the training rows only.
    pub vocabulary: Vocabulary,
    /// Training rows before resampling, tagged with dataset indices.
    pub train_raw: FeatureMatrix,
    /// Training rows after resampling; synthetic rows index `train_raw`.
    pub train: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub resample: ResampleReport,
}

pub fn prepare_fold(d: &Dataset, cfg: &ExperimentConfig, plan: &CvPlan, fold: usize) -> Result<FoldData> {
    let train_indices = plan.training(fold);
    let validation_indices = plan.validation(fold).to_vec();
    let seed = fold_seed(cfg.seed, fold);
    let vocabulary = vectorizer::fit(&d.subset(&train_indices), &cfg.tfidf)?;
    let train_raw = vectorizer::transform_rows(&vocabulary, d, &train_indices);
    let validation = vectorizer::transform_rows(&vocabulary, d, &validation_indices);
    let (train, report) = resample(&train_raw, cfg.resample, &cfg.smote_params(seed))?;
    debug!(
        "fold {fold}: {} train rows ({} after {}), {} validation rows, {} terms",
        train_raw.n_rows(),
        train.n_rows(),
        cfg.resample.as_str(),
        validation.n_rows(),
        vocabulary.len()
    );
    Ok(FoldData {
        fold,
        seed,
        train_indices,
        validation_indices,
        vocabulary,
        train_raw,
        train,
        validation,
        resample: report,
    })
}

/// Scores predictions for a fold over the dataset's full class list.
pub fn score_fold(classes: &[Label], fd: &FoldData, predicted: &[Label]) -> Result<MetricsReport> {
    metrics(&confusion_matrix(fd.validation.labels(), predicted, classes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub vocabulary_size: usize,
    pub resample: ResampleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub id: String,
    pub name: String,
    pub spec: ModelSpec,
    pub aggregate: AggregateReport,
    /// One entry per fold, in fold order.
    pub folds: Vec<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub config: ExperimentConfig,
    pub n_records: usize,
    pub class_counts: std::collections::BTreeMap<Label, usize>,
    pub folds: Vec<FoldSummary>,
    pub models: Vec<ModelReport>,
    /// Where the final model was written, when one was trained.
    pub final_model: Option<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One CSV line per (model, fold): plot data for per-fold metrics.
    pub fn write_fold_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "resample", "fold", "accuracy", "precision", "recall", "f1", "mcc"])?;
        for m in &self.models {
            for (i, r) in m.folds.iter().enumerate() {
                w.write_record([
                    m.id.clone(),
                    self.config.resample.as_str().to_string(),
                    i.to_string(),
                    r.accuracy.to_string(),
                    r.precision.to_string(),
                    r.recall.to_string(),
                    r.f1.to_string(),
                    r.mcc.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn table_rows(&self) -> Vec<(String, AggregateReport)> {
        self.models.iter().map(|m| (m.name.clone(), m.aggregate.clone())).collect()
    }
}

struct FoldOutcome {
    summary: FoldSummary,
    metrics: Vec<MetricsReport>,
}

fn run_fold(d: &Dataset, cfg: &ExperimentConfig, plan: &CvPlan, classes: &[Label], fold: usize) -> Result<FoldOutcome> {
    let fd = prepare_fold(d, cfg, plan, fold)?;
    let mut out = Vec::with_capacity(cfg.models.len());
    for spec in &cfg.models {
        let model = train(spec, &fd.train, fd.seed)?;
        let predicted = predict(&model, &fd.validation)?;
        let report = score_fold(classes, &fd, &predicted)?;
        debug!("fold {fold}: {} accuracy {:.4}", spec.id(), report.accuracy);
        out.push(report);
    }
    info!("fold {}/{} done", fold + 1, plan.k);
    Ok(FoldOutcome {
        summary: FoldSummary {
            fold,
            seed: fd.seed,
            train_rows: fd.train.n_rows(),
            validation_rows: fd.validation.n_rows(),
            vocabulary_size: fd.vocabulary.len(),
            resample: fd.resample,
        },
        metrics: out,
    })
}

/// Cross-validates every configured model, one fold at a time.
pub fn run_cv(d: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_cv_with_jobs(d, cfg, 1)
}

/// As [`run_cv`], with up to `jobs` folds in flight. The report does not
/// depend on `jobs`.
pub fn run_cv_with_jobs(d: &Dataset, cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let plan = stratified_kfold(&d.labels(), cfg.k, cfg.seed)?;
    let classes = d.classes();
    let one = |fold: usize| {
        run_fold(d, cfg, &plan, &classes, fold).map_err(|e| Error::Fold {
            fold,
            source: Box::new(e),
        })
    };
    let outcomes: Vec<FoldOutcome> = if jobs <= 1 {
        (0..plan.k).map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| (0..plan.k).into_par_iter().map(one).collect::<Result<_>>())?
    };

    let mut models = Vec::with_capacity(cfg.models.len());
    for (m, spec) in cfg.models.iter().enumerate() {
        let folds: Vec<MetricsReport> = outcomes.iter().map(|o| o.metrics[m].clone()).collect();
        models.push(ModelReport {
            id: spec.id(),
            name: spec.display_name(),
            spec: *spec,
            aggregate: aggregate(&folds)?,
            folds,
        });
    }
    Ok(ExperimentReport {
        report_version: REPORT_VERSION,
        config: cfg.clone(),
        n_records: d.len(),
        class_counts: class_distribution(d),
        folds: outcomes.into_iter().map(|o| o.summary).collect(),
        models,
        final_model: None,
    })
}

/// A deployable model: the vocabulary it was trained against plus the
/// fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalModel {
    pub artifact_version: u32,
    pub vocabulary: Vocabulary,
    pub model: TrainedModel,
    pub resample: ResampleMode,
    pub seed: u64,
    pub smote_k_neighbors: usize,
    pub resample_report: ResampleReport,
}

impl FinalModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Classifies raw requirement texts.
    pub fn predict_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Label>> {
        let mut m = FeatureMatrix::empty(self.vocabulary.len());
        for t in texts {
            let row = vectorizer::transform_text(&self.vocabulary, t.as_ref());
            m.push_row(&row, self.model.classes[0], crate::vectorizer::RowOrigin::Original(0))?;
        }
        predict(&self.model, &m)
    }
}

/// Fits the vectorizer, resampler and `spec` on every record.
pub fn train_final(d: &Dataset, cfg: &ExperimentConfig, spec: &ModelSpec) -> Result<FinalModel> {
    check_k(cfg.k)?;
    spec.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocabulary = vectorizer::fit(d, &cfg.tfidf)?;
    let full = vectorizer::transform(&vocabulary, d);
    let (balanced, report) = resample(&full, cfg.resample, &cfg.smote_params(cfg.seed))?;
    let model = train(spec, &balanced, cfg.seed)?;
    info!(
        "final {} trained on {} rows ({} after {})",
        spec.id(),
        full.n_rows(),
        balanced.n_rows(),
        cfg.resample.as_str()
    );
    Ok(FinalModel {
        artifact_version: REPORT_VERSION,
        vocabulary,
        model,
        resample: cfg.resample,
        seed: cfg.seed,
        smote_k_neighbors: cfg.smote_k_neighbors,
        resample_report: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RequirementRecord;
    use proptest::prelude::*;

    fn rec(id: usize, text: &str, label: Label) -> RequirementRecord {
        RequirementRecord {
            id: id.to_string(),
            text: text.to_string(),
            label,
        }
    }

    /// Three loosely separable classes with a shared vocabulary.
    pub(crate) fn toy(n_per_class: usize) -> Dataset {
        let words = [
            (Label::SE, ["secure", "password", "encrypt", "access"]),
            (Label::US, ["easy", "intuitive", "learn", "user"]),
            (Label::F, ["display", "record", "report", "user"]),
        ];
        let mut out = Vec::new();
        for (c, (label, w)) in words.iter().enumerate() {
            for i in 0..n_per_class {
                let text = format!(
                    "the system shall {} {} the {} {}",
                    w[i % 4],
                    w[(i + 1) % 4],
                    w[(i * 3 + c) % 4],
                    ["data", "screen", "account"][i % 3]
                );
                out.push(rec(out.len(), &text, *label));
            }
        }
        Dataset::new(out)
    }

    #[test]
    fn two_by_two_plan() {
        let plan = stratified_kfold(&[Label::A, Label::A, Label::F, Label::F], 2, 7).unwrap();
        for f in &plan.folds {
            assert_eq!(f.len(), 2);
            let labels: Vec<Label> = f.iter().map(|&i| [Label::A, Label::A, Label::F, Label::F][i]).collect();
            assert!(labels.contains(&Label::A) && labels.contains(&Label::F));
        }
    }

    #[test]
    fn class_too_small_names_the_class() {
        let mut labels = vec![Label::F; 30];
        labels.extend([Label::PO; 12]);
        match stratified_kfold(&labels, 13, 42) {
            Err(Error::ClassTooSmall { label, count, folds }) => {
                assert_eq!((label, count, folds), (Label::PO, 12, 13));
            }
            other => panic!("{other:?}"),
        }
        assert!(stratified_kfold(&labels, 12, 42).is_ok());
    }

    #[test]
    fn k_below_two_is_a_config_error() {
        let e = stratified_kfold(&[Label::A, Label::A], 1, 0).unwrap_err();
        assert_eq!(e.code(), "E_CONFIG");
        assert!(e.to_string().contains("K must be ≥ 2"));
    }

    proptest! {
        #[test]
        fn plan_is_a_stratified_partition(
            counts in proptest::collection::vec(3usize..40, 1..6),
            k in 2usize..4,
            seed in any::<u64>(),
        ) {
            let mut labels = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat_n(Label::ALL[c], n));
            }
            let plan = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..counts.len() {
                let per_fold: Vec<usize> = plan
                    .folds
                    .iter()
                    .map(|f| f.iter().filter(|&&i| labels[i] == Label::ALL[c]).count())
                    .collect();
                let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(&plan, &stratified_kfold(&labels, k, seed).unwrap());
        }
    }

    #[test]
    fn fold_vocabulary_ignores_validation_rows() {
        let d = toy(6);
        let cfg = ExperimentConfig {
            k: 3,
            ..ExperimentConfig::default()
        };
        let plan = stratified_kfold(&d.labels(), 3, cfg.seed).unwrap();
        for fold in 0..3 {
            let fd = prepare_fold(&d, &cfg, &plan, fold).unwrap();
            let refit = vectorizer::fit(&d.subset(&fd.train_indices), &cfg.tfidf).unwrap();
            assert_eq!(fd.vocabulary, refit);
            assert_eq!(fd.vocabulary.n_docs(), fd.train_indices.len());
            let direct = vectorizer::transform_rows(&refit, &d, &fd.validation_indices);
            assert_eq!(fd.validation, direct);
            for o in fd.train.origins() {
                if let crate::vectorizer::RowOrigin::Synthetic { base, neighbor } = *o {
                    for i in [base, neighbor] {
                        let crate::vectorizer::RowOrigin::Original(r) = fd.train_raw.origins()[i] else {
                            panic!("synthetic parent must be an original row")
                        };
                        assert!(!fd.validation_indices.contains(&r));
                    }
                }
            }
        }
    }

    #[test]
    fn majority_stub_scores_the_majority_share() {
        // Imbalanced: 10 F, 5 SE, 5 US.
        let mut recs = toy(10).records().to_vec();
        recs.retain(|r| r.label == Label::F || r.id.parse::<usize>().unwrap() % 2 == 0);
        let d = Dataset::new(recs);
        let cfg = ExperimentConfig {
            k: 5,
            resample: ResampleMode::None,
            ..ExperimentConfig::default()
        };
        let plan = stratified_kfold(&d.labels(), 5, 1).unwrap();
        for fold in 0..5 {
            let fd = prepare_fold(&d, &cfg, &plan, fold).unwrap();
            let majority = *fd.train.class_counts().iter().max_by_key(|(_, &n)| n).unwrap().0;
            let predicted = vec![majority; fd.validation.n_rows()];
            let r = score_fold(&d.classes(), &fd, &predicted).unwrap();
            let share = fd.validation.labels().iter().filter(|&&l| l == majority).count() as f64
                / fd.validation.n_rows() as f64;
            assert_eq!(majority, Label::F);
            assert_eq!(r.accuracy, share);
        }
    }

    #[test]
    fn repeated_runs_are_identical_and_jobs_do_not_matter() {
        let d = toy(6);
        let cfg = ExperimentConfig {
            k: 2,
            models: vec![ModelSpec::logistic_regression(), ModelSpec::knn(3), ModelSpec::decision_tree()],
            ..ExperimentConfig::default()
        };
        let a = run_cv(&d, &cfg).unwrap().to_json().unwrap();
        let b = run_cv(&d, &cfg).unwrap().to_json().unwrap();
        let c = run_cv_with_jobs(&d, &cfg, 2).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let r = run_cv(&d, &cfg).unwrap();
        assert_eq!(r.report_version, 1);
        assert!(r.models.iter().all(|m| m.folds.len() == 2));
        assert_eq!(r.folds.len(), 2);
    }

    #[test]
    fn fold_csv_has_one_line_per_model_and_fold() {
        let d = toy(6);
        let cfg = ExperimentConfig {
            k: 3,
            models: vec![ModelSpec::multinomial_nb(), ModelSpec::knn(5)],
            resample: ResampleMode::Smote,
            ..ExperimentConfig::default()
        };
        let r = run_cv(&d, &cfg).unwrap();
        let mut buf = Vec::new();
        r.write_fold_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.lines().nth(1).unwrap().starts_with("nb,smote,0,"));
    }

    #[test]
    fn fold_errors_carry_context() {
        let d = toy(4);
        let cfg = ExperimentConfig {
            k: 2,
            tfidf: TfidfConfig {
                min_df: 1000,
                ..TfidfConfig::default()
            },
            ..ExperimentConfig::default()
        };
        match run_cv(&d, &cfg) {
            Err(Error::Fold { fold: 0, source }) => assert!(matches!(*source, Error::EmptyVocabulary)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn final_model_round_trips_and_classifies() {
        let d = toy(6);
        let cfg = ExperimentConfig::default();
        let fm = train_final(&d, &cfg, &ModelSpec::logistic_regression()).unwrap();
        assert_eq!(fm.vocabulary.n_docs(), d.len());
        let back = FinalModel::from_json(&fm.to_json().unwrap()).unwrap();
        assert_eq!(back, fm);
        let p = fm.predict_texts(&["encrypt the password", "intuitive and easy to learn"]).unwrap();
        assert_eq!(p, vec![Label::SE, Label::US]);
    }

    #[test]
    fn final_model_without_resampling_sees_raw_rows() {
        let d = toy(5);
        let cfg = ExperimentConfig {
            resample: ResampleMode::None,
            ..ExperimentConfig::default()
        };
        let fm = train_final(&d, &cfg, &ModelSpec::multinomial_nb()).unwrap();
        assert_eq!(fm.resample_report.counts_after, class_distribution(&d));
    }

    #[test]
    fn final_model_on_one_class_rejects_discriminative_models() {
        let d = Dataset::new(vec![rec(0, "shall encrypt", Label::SE), rec(1, "shall hash", Label::SE)]);
        let cfg = ExperimentConfig::default();
        let e = train_final(&d, &cfg, &ModelSpec::logistic_regression()).unwrap_err();
        assert!(matches!(e, Error::SingleClassTraining(Label::SE)));
    }
}
