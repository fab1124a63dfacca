//! Command-line front end.
//!
//! Settings resolve in three layers: command-line flags win over a TOML
//! config file (`--config`), which wins over built-in defaults. When no
//! data file is named anywhere, `$REQCLASS_DATA_DIR/PROMISE_exp.csv` is
//! used.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 1 for
//! runtime failures. Every failure prints one line of the form
//! `error[E_CODE]: message` on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::corpus::{class_distribution, load_promise_csv, ColumnMapping, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::render_table;
use crate::harness::{run_cv_with_jobs, train_final, ExperimentConfig, ExperimentReport, FinalModel};
use crate::models::{top_features, FittedParams, ModelSpec};
use crate::resampler::{resample, ResampleMode, SmoteParams};
use crate::vectorizer::{self, nonzero_terms, TfidfConfig};

pub const DATA_DIR_ENV: &str = "REQCLASS_DATA_DIR";
pub const DEFAULT_DATA_FILE: &str = "PROMISE_exp.csv";

#[derive(Debug, Parser)]
#[command(name = "reqclass", version, about = "Imbalanced requirements classification experiments")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate models and report mean ± std metrics.
    Run(RunArgs),
    /// Fit one model on the whole dataset and save it with its vocabulary.
    Train(TrainArgs),
    /// Show the strongest logistic regression terms per class.
    Inspect(InspectArgs),
    /// Print the class distribution of a dataset.
    Distribution(DistributionArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionFormat {
    Table,
    Csv,
}

#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Labelled requirements CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column holding the requirement text (header auto-detected when omitted).
    #[arg(long, requires = "label_column")]
    pub text_column: Option<String>,
    #[arg(long, requires = "text_column")]
    pub label_column: Option<String>,
    #[arg(long, requires = "text_column")]
    pub id_column: Option<String>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ExperimentArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Resampling applied to training rows: none, smote or smote-tomek.
    #[arg(long)]
    pub resample: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Neighbours considered by SMOTE.
    #[arg(long)]
    pub smote_k: Option<usize>,
    /// Minimum document frequency for a vocabulary term.
    #[arg(long)]
    pub min_df: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Comma-separated model ids (lr, svm, nb, knn3, knn5, knn7, dt) or `all`.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-fold metrics CSV for plotting.
    #[arg(long)]
    pub fold_csv: Option<PathBuf>,
    /// Also train the first model on all rows and save it here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    /// Folds evaluated in parallel; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Model id to train.
    #[arg(long, default_value = "lr")]
    pub model: String,
    /// Artifact path (JSON).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Artifact written by `train` or `run --save-model`.
    #[arg(long)]
    pub model: PathBuf,
    /// Terms listed per class.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Print the nonzero terms of this many random synthetic rows produced by
    /// resampling `--data` with the artifact's settings.
    #[arg(long)]
    pub show_resampled: Option<usize>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "table")]
    pub format: DistributionFormat,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub columns: Option<ColumnMapping>,
    pub models: Option<Vec<String>>,
    pub resample: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub smote_k_neighbors: Option<usize>,
    pub tfidf: Option<TfidfConfig>,
}

impl FileConfig {
    /// Relative `data` paths are taken relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        if let (Some(d), Some(dir)) = (&cfg.data, path.parent()) {
            if d.is_relative() {
                cfg.data = Some(dir.join(d));
            }
        }
        Ok(cfg)
    }
}

/// A failure together with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub error: Error,
}

impl CliError {
    fn usage(error: Error) -> Self {
        Self { exit_code: 2, error }
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        let exit_code = match error {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            _ => 1,
        };
        Self { exit_code, error }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_models(ids: &[String]) -> Result<Vec<ModelSpec>> {
    let mut out = Vec::new();
    for id in ids {
        let id = id.trim();
        if id.eq_ignore_ascii_case("all") {
            out.extend(ModelSpec::all());
        } else {
            out.push(ModelSpec::from_id(id).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    Ok(out)
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn resolve_data_path(flag: Option<&PathBuf>, file: Option<&PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag.or(file) {
        return Ok(p.clone());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir).join(DEFAULT_DATA_FILE)),
        _ => Err(Error::Config(format!("no data file: pass --data or set {DATA_DIR_ENV}"))),
    }
}

fn load_data(args: &DataArgs, file: &FileConfig) -> Result<Dataset> {
    let path = resolve_data_path(args.data.as_ref(), file.data.as_ref())?;
    let flag_mapping = args.text_column.as_ref().map(|text| ColumnMapping {
        id: args.id_column.clone(),
        text: text.clone(),
        label: args.label_column.clone().unwrap_or_default(),
    });
    let mapping = flag_mapping.or_else(|| file.columns.clone());
    let d = load_promise_csv(&path, mapping.as_ref())?;
    info!("loaded {} records from {}", d.len(), path.display());
    Ok(d)
}

/// Flags over file over defaults. `models` and `k` are only meaningful for
/// `run`, so callers pass them separately.
fn experiment_config(
    args: &ExperimentArgs,
    file: &FileConfig,
    models: Option<&[String]>,
    k: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(ids) = models.or(file.models.as_deref()) {
        cfg.models = parse_models(ids)?;
    }
    if let Some(mode) = args.resample.as_ref().or(file.resample.as_ref()) {
        cfg.resample = mode.parse::<ResampleMode>()?;
    }
    cfg.k = k.or(file.k).unwrap_or(cfg.k);
    cfg.seed = args.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.smote_k_neighbors = args.smote_k.or(file.smote_k_neighbors).unwrap_or(cfg.smote_k_neighbors);
    if let Some(t) = &file.tfidf {
        cfg.tfidf = t.clone();
    }
    if let Some(min_df) = args.min_df {
        cfg.tfidf.min_df = min_df;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Aggregate metrics as CSV, one line per model.
pub fn aggregate_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "name",
        "resample",
        "folds",
        "accuracy_mean",
        "accuracy_std",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
        "f1_mean",
        "f1_std",
        "mcc_mean",
        "mcc_std",
    ])?;
    for m in &report.models {
        let a = &m.aggregate;
        let mut rec = vec![
            m.id.clone(),
            m.name.clone(),
            report.config.resample.as_str().to_string(),
            a.folds.to_string(),
        ];
        for s in [a.accuracy, a.precision, a.recall, a.f1, a.mcc] {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}

fn render_report(report: &ExperimentReport, format: Format) -> Result<String> {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => aggregate_csv(report),
        Format::Table => {
            let c = &report.config;
            Ok(format!(
                "{} records, {}-fold stratified CV, resample {}, seed {}\n\n{}",
                report.n_records,
                c.k,
                c.resample.as_str(),
                c.seed,
                render_table(&report.table_rows())
            ))
        }
    }
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let file = load_file_config(args.experiment.config.as_deref())?;
    let cfg = experiment_config(&args.experiment, &file, args.models.as_deref(), args.k)?;
    let format = args.format.or(file.format).unwrap_or(Format::Table);
    let jobs = args.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::usage(Error::Config("--jobs must be ≥ 1".into())));
    }
    let d = load_data(&args.data, &file)?;
    let mut report = run_cv_with_jobs(&d, &cfg, jobs)?;
    if let Some(path) = &args.save_model {
        let fm = train_final(&d, &cfg, &cfg.models[0])?;
        fm.save(path)?;
        report.final_model = Some(path.display().to_string());
    }
    if let Some(path) = &args.fold_csv {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        report.write_fold_csv(std::io::BufWriter::new(f))?;
    }
    emit(args.output.as_deref(), &render_report(&report, format)?)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let file = load_file_config(args.experiment.config.as_deref())?;
    let cfg = experiment_config(&args.experiment, &file, Some(std::slice::from_ref(&args.model)), None)?;
    let d = load_data(&args.data, &file)?;
    let fm = train_final(&d, &cfg, &cfg.models[0])?;
    fm.save(&args.output)?;
    println!(
        "saved {} ({} classes, {} terms, {} training rows after {}) to {}",
        fm.model.spec.display_name(),
        fm.model.classes.len(),
        fm.vocabulary.len(),
        fm.resample_report.counts_after.values().sum::<usize>(),
        fm.resample.as_str(),
        args.output.display()
    );
    Ok(())
}

/// Per-class `term  weight` lines for the strongest positive coefficients.
pub fn format_top_features(fm: &FinalModel, n: usize) -> Result<String> {
    let top = top_features(&fm.model, &fm.vocabulary, n)?;
    let mut out = String::new();
    for (label, terms) in &top {
        out.push_str(&format!("{} ({})\n", label.code(), label.name()));
        let width = terms.iter().map(|(t, _)| t.chars().count()).max().unwrap_or(0);
        for (term, w) in terms {
            out.push_str(&format!("  {term:<width$}  {w:.6}\n"));
        }
    }
    Ok(out)
}

/// Nonzero terms of `n` synthetic rows chosen at random, one line each:
/// `LABEL: term, term, ...`.
pub fn format_resampled(fm: &FinalModel, d: &Dataset, n: usize) -> Result<String> {
    let full = vectorizer::transform(&fm.vocabulary, d);
    let mode = match fm.resample {
        ResampleMode::None => ResampleMode::SmoteTomek,
        m => m,
    };
    let params = SmoteParams {
        k_neighbors: fm.smote_k_neighbors,
        seed: fm.seed,
    };
    let (balanced, _) = resample(&full, mode, &params)?;
    let synthetic: Vec<usize> = (0..balanced.n_rows())
        .filter(|&i| balanced.origins()[i].is_synthetic())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(fm.seed);
    let mut picked: Vec<usize> = sample(&mut rng, synthetic.len(), n.min(synthetic.len()))
        .into_iter()
        .map(|i| synthetic[i])
        .collect();
    picked.sort_unstable();
    let mut out = String::new();
    for i in picked {
        let terms = nonzero_terms(&fm.vocabulary, balanced.row(i))?;
        out.push_str(&format!("{}: {}\n", balanced.labels()[i].code(), terms.join(", ")));
    }
    Ok(out)
}

fn cmd_inspect(args: &InspectArgs) -> CliResult<()> {
    let fm = FinalModel::load(&args.model).map_err(CliError::usage)?;
    if !matches!(fm.model.params, FittedParams::Logistic(_)) {
        return Err(CliError::usage(Error::UnsupportedModel {
            operation: "inspect",
            kind: fm.model.spec.kind(),
        }));
    }
    let mut out = format_top_features(&fm, args.top)?;
    if let Some(n) = args.show_resampled {
        let d = load_data(&args.data, &FileConfig::default())?;
        out.push('\n');
        out.push_str(&format_resampled(&fm, &d, n)?);
    }
    emit(None, &out)?;
    Ok(())
}

/// Class counts with percentages, largest first, then a total line.
pub fn format_distribution(counts: &BTreeMap<crate::corpus::Label, usize>) -> String {
    let total: usize = counts.values().sum();
    let mut rows: Vec<_> = counts.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let name_width = rows.iter().map(|(l, _)| l.name().len()).max().unwrap_or(0);
    let mut out = String::new();
    for (label, &n) in rows {
        out.push_str(&format!(
            "{:<3} {:<name_width$}  {:>5}  {:>5.1}%\n",
            label.code(),
            label.name(),
            n,
            100.0 * n as f64 / total as f64
        ));
    }
    out.push_str(&format!("{:<3} {:<name_width$}  {:>5}\n", "", "total", total));
    out
}

fn cmd_distribution(args: &DistributionArgs) -> CliResult<()> {
    let d = load_data(&args.data, &FileConfig::default())?;
    let counts = class_distribution(&d);
    let text = match args.format {
        DistributionFormat::Table => format_distribution(&counts),
        DistributionFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["label", "count"]).map_err(Error::from)?;
            for (l, n) in &counts {
                w.write_record([l.code(), &n.to_string()]).map_err(Error::from)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
            String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given")
        }
    };
    emit(None, &text)?;
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("REQCLASS_LOG")
        .format_timestamp(None)
        .try_init();
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Distribution(a) => cmd_distribution(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError { exit_code, error }) => {
            let hint = if exit_code == 2 { " (see --help for usage)" } else { "" };
            let msg = error.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}{hint}", error.code());
            exit_code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    #[test]
    fn models_parse_ids_and_all() {
        let m = parse_models(&["lr".into(), "knn5".into()]).unwrap();
        assert_eq!(m, vec![ModelSpec::logistic_regression(), ModelSpec::knn(5)]);
        assert_eq!(parse_models(&["all".into()]).unwrap().len(), 7);
        assert_eq!(parse_models(&["rf".into()]).unwrap_err().code(), "E_CONFIG");
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file: FileConfig = toml::from_str(
            "k = 5\nseed = 7\nresample = \"none\"\nmodels = [\"nb\"]\n[tfidf]\nmin_df = 2\n",
        )
        .unwrap();
        let flags = ExperimentArgs {
            seed: Some(9),
            ..ExperimentArgs::default()
        };
        let cfg = experiment_config(&flags, &file, None, None).unwrap();
        assert_eq!((cfg.k, cfg.seed, cfg.resample), (5, 9, ResampleMode::None));
        assert_eq!(cfg.models, vec![ModelSpec::multinomial_nb()]);
        assert_eq!(cfg.tfidf.min_df, 2);
        assert!(cfg.tfidf.lowercase);
        let cfg = experiment_config(&flags, &file, Some(&["lr".to_string()]), Some(3)).unwrap();
        assert_eq!((cfg.k, cfg.models[0]), (3, ModelSpec::logistic_regression()));
        let defaults = experiment_config(&ExperimentArgs::default(), &FileConfig::default(), None, None).unwrap();
        assert_eq!(defaults, ExperimentConfig::default());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("folds = 3\n").is_err());
    }

    #[test]
    fn k_one_is_a_usage_error() {
        let e: CliError = experiment_config(&ExperimentArgs::default(), &FileConfig::default(), None, Some(1))
            .unwrap_err()
            .into();
        assert_eq!(e.exit_code, 2);
        assert!(e.error.to_string().contains("K must be ≥ 2"));
    }

    #[test]
    fn distribution_table_lists_largest_first() {
        let counts = BTreeMap::from([(Label::SE, 1), (Label::F, 3)]);
        let t = format_distribution(&counts);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("F "));
        assert!(lines[0].ends_with("75.0%"));
        assert!(lines[1].starts_with("SE "));
        assert!(lines[2].contains("total") && lines[2].ends_with('4'));
    }
}
