//! TF-IDF featurization.
//!
//! Weights are raw in-sentence counts times the smoothed inverse document
//! frequency `ln((1 + N) / (1 + df)) + 1`, and every row is scaled to unit
//! L2 norm. Columns are the vocabulary terms in sorted order.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};

/// Values at or below this are treated as absent by [`nonzero_terms`].
pub const NONZERO_THRESHOLD: f64 = 1e-12;

pub const DEFAULT_TOKEN_PATTERN: &str = r"[\p{L}\p{N}]{2,}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub lowercase: bool,
    /// Every match of this pattern is one token.
    pub token_pattern: String,
    pub stop_words: Vec<String>,
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            token_pattern: DEFAULT_TOKEN_PATTERN.to_string(),
            stop_words: Vec::new(),
            min_df: 1,
        }
    }
}

#[derive(Debug, Clone)]
struct Tokenizer {
    lowercase: bool,
    pattern: Regex,
    stop_words: Vec<String>,
}

impl Tokenizer {
    fn new(cfg: &TfidfConfig) -> Result<Self> {
        if cfg.min_df == 0 {
            return Err(Error::InvalidParameter("min_df must be >= 1".into()));
        }
        let pattern = Regex::new(&cfg.token_pattern)
            .map_err(|e| Error::Config(format!("token pattern: {e}")))?;
        let mut stop_words: Vec<String> = cfg
            .stop_words
            .iter()
            .map(|w| if cfg.lowercase { w.to_lowercase() } else { w.clone() })
            .collect();
        stop_words.sort();
        stop_words.dedup();
        Ok(Self {
            lowercase: cfg.lowercase,
            pattern,
            stop_words,
        })
    }

    fn tokens(&self, text: &str) -> Vec<String> {
        let text = if self.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        };
        self.pattern
            .find_iter(&text)
            .map(|m| m.as_str().to_string())
            .filter(|t| self.stop_words.binary_search(t).is_err())
            .collect()
    }
}

/// Fitted term index with document frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "VocabularyDoc", into = "VocabularyDoc")]
pub struct Vocabulary {
    config: TfidfConfig,
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
    tokenizer: Tokenizer,
}

#[derive(Serialize, Deserialize)]
struct VocabularyDoc {
    config: TfidfConfig,
    n_docs: usize,
    terms: Vec<String>,
    df: Vec<usize>,
}

impl TryFrom<VocabularyDoc> for Vocabulary {
    type Error = Error;

    fn try_from(doc: VocabularyDoc) -> Result<Self> {
        Vocabulary::from_parts(doc.config, doc.terms, doc.df, doc.n_docs)
    }
}

impl From<Vocabulary> for VocabularyDoc {
    fn from(v: Vocabulary) -> Self {
        VocabularyDoc {
            config: v.config,
            n_docs: v.n_docs,
            terms: v.terms,
            df: v.df,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.terms == other.terms
            && self.df == other.df
            && self.n_docs == other.n_docs
    }
}

impl Vocabulary {
    fn from_parts(config: TfidfConfig, terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Result<Self> {
        if terms.len() != df.len() {
            return Err(Error::VocabularyFormat(format!(
                "{} terms but {} document frequencies",
                terms.len(),
                df.len()
            )));
        }
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if let Some(bad) = df.iter().position(|&d| d == 0 || d > n_docs) {
            return Err(Error::VocabularyFormat(format!(
                "term `{}` has df {} outside 1..={n_docs}",
                terms[bad], df[bad]
            )));
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::VocabularyFormat("terms must be unique and sorted".into()));
        }
        let tokenizer = Tokenizer::new(&config)?;
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            config,
            terms,
            df,
            n_docs,
            index,
            tokenizer,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, column: usize) -> Option<&str> {
        self.terms.get(column).map(String::as_str)
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.df[c])
    }

    pub fn idf(&self, column: usize) -> f64 {
        smoothed_idf(self.n_docs, self.df[column])
    }

    /// Token stream for `text` under this vocabulary's tokenizer settings.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenizer.tokens(text)
    }

    /// Text audit format: an `n_docs,<N>` line, a `term,df` header, then one
    /// `term,df` record per column in column order.
    pub fn write_text<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["n_docs", &self.n_docs.to_string()])?;
        w.write_record(["term", "df"])?;
        for (t, d) in self.terms.iter().zip(&self.df) {
            w.write_record([t.as_str(), &d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<vocabulary writer>", e))?;
        Ok(())
    }

    pub fn read_text<R: Read>(reader: R, config: TfidfConfig) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let bad = |msg: &str| Error::VocabularyFormat(msg.to_string());
        let first = records.next().ok_or_else(|| bad("missing n_docs line"))??;
        if first.get(0) != Some("n_docs") {
            return Err(bad("first line must be `n_docs,<N>`"));
        }
        let n_docs: usize = first
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("n_docs is not an integer"))?;
        let header = records.next().ok_or_else(|| bad("missing term,df header"))??;
        if header.get(0) != Some("term") || header.get(1) != Some("df") {
            return Err(bad("second line must be `term,df`"));
        }
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for rec in records {
            let rec = rec?;
            let term = rec.get(0).ok_or_else(|| bad("empty record"))?;
            let d: usize = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("df is not an integer"))?;
            terms.push(term.to_string());
            df.push(d);
        }
        Self::from_parts(config, terms, df, n_docs)
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Builds the vocabulary from `corpus`. Document frequency counts each
/// document at most once per term.
pub fn fit(corpus: &Dataset, cfg: &TfidfConfig) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tokenizer = Tokenizer::new(cfg)?;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for record in corpus.records() {
        let mut tokens = tokenizer.tokens(&record.text);
        tokens.sort_unstable();
        tokens.dedup();
        for t in tokens {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (terms, dfs): (Vec<_>, Vec<_>) = df.into_iter().filter(|(_, d)| *d >= cfg.min_df).unzip();
    if terms.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Vocabulary::from_parts(cfg.clone(), terms, dfs, corpus.len())
}

/// Where a matrix row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    /// Source record index in the dataset the rows were drawn from.
    Original(usize),
    /// Interpolated row; `base` and `neighbor` index the matrix it was
    /// generated from.
    Synthetic { base: usize, neighbor: usize },
}

impl RowOrigin {
    pub fn is_synthetic(self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }
}

/// Dense row-major feature matrix with a parallel label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_cols: usize,
    data: Vec<f64>,
    labels: Vec<Label>,
    origins: Vec<RowOrigin>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize, data: Vec<f64>, labels: Vec<Label>, origins: Vec<RowOrigin>) -> Result<Self> {
        if labels.len() != origins.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: origins.len(),
            });
        }
        if data.len() != labels.len() * n_cols {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_cols,
                actual: data.len(),
            });
        }
        Ok(Self {
            n_cols,
            data,
            labels,
            origins,
        })
    }

    /// Rows tagged `Original(0..n)`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                actual: bad.len(),
            });
        }
        let origins = (0..rows.len()).map(RowOrigin::Original).collect();
        Self::new(n_cols, rows.concat(), labels, origins)
    }

    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_cols,
            data: Vec::new(),
            labels: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn origins(&self) -> &[RowOrigin] {
        &self.origins
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn push_row(&mut self, row: &[f64], label: Label, origin: RowOrigin) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.labels.push(label);
        self.origins.push(origin);
        Ok(())
    }

    /// Copies rows at `indices`, in order, keeping their origins.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::empty(self.n_cols);
        out.data.reserve(indices.len() * self.n_cols);
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
            out.origins.push(self.origins[i]);
        }
        out
    }
}

/// Transforms every record of `corpus`; row `r` is tagged `Original(r)`.
pub fn transform(vocab: &Vocabulary, corpus: &Dataset) -> FeatureMatrix {
    let rows: Vec<usize> = (0..corpus.len()).collect();
    transform_rows(vocab, corpus, &rows)
}

/// Transforms the records at `rows`; each output row is tagged with its
/// index into `corpus`.
pub fn transform_rows(vocab: &Vocabulary, corpus: &Dataset, rows: &[usize]) -> FeatureMatrix {
    let n_cols = vocab.len();
    let mut data = vec![0.0; rows.len() * n_cols];
    let mut labels = Vec::with_capacity(rows.len());
    // vocabularies are never empty, so n_cols > 0
    for (out, &r) in data.chunks_mut(n_cols).zip(rows) {
        let record = &corpus.records()[r];
        write_tfidf_row(vocab, &record.text, out);
        labels.push(record.label);
    }
    let origins = rows.iter().map(|&r| RowOrigin::Original(r)).collect();
    FeatureMatrix {
        n_cols,
        data,
        labels,
        origins,
    }
}

/// TF-IDF vector of a single text.
pub fn transform_text(vocab: &Vocabulary, text: &str) -> Vec<f64> {
    let mut row = vec![0.0; vocab.len()];
    write_tfidf_row(vocab, text, &mut row);
    row
}

fn write_tfidf_row(vocab: &Vocabulary, text: &str, out: &mut [f64]) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in vocab.tokenize(text) {
        if let Some(c) = vocab.column(&tok) {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    let mut norm_sq = 0.0;
    for (&c, &tf) in &counts {
        let v = tf as f64 * vocab.idf(c);
        out[c] = v;
        norm_sq += v * v;
    }
    if norm_sq > 0.0 {
        let norm = norm_sq.sqrt();
        for &c in counts.keys() {
            out[c] /= norm;
        }
    }
}

pub fn fit_transform(corpus: &Dataset, cfg: &TfidfConfig) -> Result<(Vocabulary, FeatureMatrix)> {
    let vocab = fit(corpus, cfg)?;
    let m = transform(&vocab, corpus);
    Ok((vocab, m))
}

/// Sorted terms whose value in `row` exceeds [`NONZERO_THRESHOLD`].
pub fn nonzero_terms(vocab: &Vocabulary, row: &[f64]) -> Result<Vec<String>> {
    if row.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            actual: row.len(),
        });
    }
    let mut terms: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > NONZERO_THRESHOLD)
        .map(|(c, _)| vocab.terms[c].clone())
        .collect();
    terms.sort();
    Ok(terms)
}
