//! SMOTE oversampling, Tomek-link detection and the combined SMOTE-Tomek
//! pass.
//!
//! Neighbour searches are exact brute-force Euclidean. Distance ties are
//! broken by the lower row index everywhere.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::SparseRows;
use crate::vectorizer::{FeatureMatrix, RowOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 42,
        }
    }
}

impl SmoteParams {
    fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter("k_neighbors must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    None,
    Smote,
    SmoteTomek,
}

impl ResampleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ResampleMode::None => "none",
            ResampleMode::Smote => "smote",
            ResampleMode::SmoteTomek => "smote_tomek",
        }
    }
}

impl std::str::FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "baseline" => Ok(ResampleMode::None),
            "smote" => Ok(ResampleMode::Smote),
            "smote_tomek" | "smotetomek" => Ok(ResampleMode::SmoteTomek),
            other => Err(Error::Config(format!(
                "unknown resample mode `{other}` (expected none, smote, smote-tomek)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomekLink {
    pub index_a: usize,
    pub index_b: usize,
    pub label_a: Label,
    pub label_b: Label,
}

/// Audit record of one resampling pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub counts_before: BTreeMap<Label, usize>,
    pub synthetic_count: BTreeMap<Label, usize>,
    pub link_count: usize,
    /// Row indices into the oversampled matrix, ascending.
    pub removed_indices: Vec<usize>,
    pub counts_after: BTreeMap<Label, usize>,
}

impl ResampleReport {
    fn unchanged(m: &FeatureMatrix) -> Self {
        let counts = m.class_counts();
        Self {
            counts_before: counts.clone(),
            counts_after: counts,
            ..Self::default()
        }
    }
}

/// `x_i + λ (x_nn − x_i)` per coordinate.
pub fn interpolate(base: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    base.iter()
        .zip(neighbor)
        .map(|(&a, &b)| {
            if lambda == 1.0 {
                return b;
            }
            let s = a + lambda * (b - a);
            // rounding may land one ulp outside the parent interval
            s.clamp(a.min(b), a.max(b))
        })
        .collect()
}

/// Indices (into `members`) of the `k` nearest other members for each of
/// the first `bases` members.
fn same_class_neighbors(sparse: &SparseRows, members: &[usize], bases: usize, k: usize) -> Vec<Vec<usize>> {
    members[..bases]
        .iter()
        .enumerate()
        .map(|(a, &ra)| {
            let mut cand: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &rb)| (sparse.squared_distance(ra, rb), b))
                .collect();
            cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// Brings every class up to the current majority count with interpolated
/// rows. Originals keep their place; synthetic rows follow, grouped by class
/// in label order. Bases cycle through the class's rows in order; the
/// neighbour and λ come from a ChaCha8 stream keyed by seed and class.
pub fn smote_oversample(m: &FeatureMatrix, p: &SmoteParams) -> Result<FeatureMatrix> {
    p.validate()?;
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in m.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let sparse = SparseRows::from_matrix(m);
    let mut out = m.clone();

    for (&label, members) in &by_class {
        let needed = target - members.len();
        if needed == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(label as u64 + 1);
        if members.len() == 1 {
            warn!("class {label} has a single row; duplicating it {needed} times");
            let base = members[0];
            let row = m.row(base).to_vec();
            for _ in 0..needed {
                out.push_row(&row, label, RowOrigin::Synthetic { base, neighbor: base })?;
            }
            continue;
        }
        let k_eff = p.k_neighbors.min(members.len() - 1);
        let bases = needed.min(members.len());
        let neighbors = same_class_neighbors(&sparse, members, bases, k_eff);
        for j in 0..needed {
            let a = j % members.len();
            let b = neighbors[a][rng.gen_range(0..k_eff)];
            let lambda: f64 = rng.gen();
            let (base, neighbor) = (members[a], members[b]);
            let row = interpolate(m.row(base), m.row(neighbor), lambda);
            out.push_row(&row, label, RowOrigin::Synthetic { base, neighbor })?;
        }
    }
    Ok(out)
}

/// Index of each row's nearest other row (ties to the lower index).
pub fn nearest_neighbors(m: &FeatureMatrix) -> Vec<Option<usize>> {
    let sparse = SparseRows::from_matrix(m);
    let n = m.n_rows();
    let mut best: Vec<(f64, Option<usize>)> = vec![(f64::INFINITY, None); n];
    // Candidates for every row arrive in ascending index order, so a strict
    // comparison keeps the lowest index among equal distances.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sparse.squared_distance(i, j);
            if best[i].1.is_none() || d < best[i].0 {
                best[i] = (d, Some(j));
            }
            if best[j].1.is_none() || d < best[j].0 {
                best[j] = (d, Some(i));
            }
        }
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// Pairs of mutual nearest neighbours with different labels, each reported
/// once with `index_a < index_b`, ordered by `index_a`.
pub fn find_tomek_links(m: &FeatureMatrix) -> Vec<TomekLink> {
    if m.n_rows() < 2 {
        return Vec::new();
    }
    let nn = nearest_neighbors(m);
    let labels = m.labels();
    nn.iter()
        .enumerate()
        .filter_map(|(i, &j)| {
            let j = j?;
            (i < j && nn[j] == Some(i) && labels[i] != labels[j]).then(|| TomekLink {
                index_a: i,
                index_b: j,
                label_a: labels[i],
                label_b: labels[j],
            })
        })
        .collect()
}

/// Drops, for each link, the member whose class had more original rows
/// (rows tagged [`RowOrigin::Original`]); equal counts drop both.
pub fn remove_tomek_majority(m: &FeatureMatrix, links: &[TomekLink]) -> Result<(FeatureMatrix, ResampleReport)> {
    let n = m.n_rows();
    let mut original_counts: BTreeMap<Label, usize> = BTreeMap::new();
    for (&l, o) in m.labels().iter().zip(m.origins()) {
        if !o.is_synthetic() {
            *original_counts.entry(l).or_insert(0) += 1;
        }
    }
    let count = |l: Label| original_counts.get(&l).copied().unwrap_or(0);

    let mut removed = BTreeSet::new();
    for link in links {
        for index in [link.index_a, link.index_b] {
            if index >= n {
                return Err(Error::StaleLinks { index, rows: n });
            }
        }
        let (ca, cb) = (count(link.label_a), count(link.label_b));
        if ca >= cb {
            removed.insert(link.index_a);
        }
        if cb >= ca {
            removed.insert(link.index_b);
        }
    }
    let keep: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
    let out = m.select_rows(&keep);
    let report = ResampleReport {
        counts_before: m.class_counts(),
        synthetic_count: BTreeMap::new(),
        link_count: links.len(),
        removed_indices: removed.into_iter().collect(),
        counts_after: out.class_counts(),
    };
    Ok((out, report))
}

fn synthetic_counts(m: &FeatureMatrix) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for (&l, o) in m.labels().iter().zip(m.origins()) {
        if o.is_synthetic() {
            *counts.entry(l).or_insert(0) += 1;
        }
    }
    counts
}

/// SMOTE followed by Tomek-link cleaning of the oversampled matrix.
pub fn smote_tomek(m: &FeatureMatrix, p: &SmoteParams) -> Result<(FeatureMatrix, ResampleReport)> {
    let oversampled = smote_oversample(m, p)?;
    let links = find_tomek_links(&oversampled);
    let (cleaned, mut report) = remove_tomek_majority(&oversampled, &links)?;
    report.counts_before = m.class_counts();
    report.synthetic_count = synthetic_counts(&oversampled);
    Ok((cleaned, report))
}

/// Applies `mode` to a training matrix.
pub fn resample(m: &FeatureMatrix, mode: ResampleMode, p: &SmoteParams) -> Result<(FeatureMatrix, ResampleReport)> {
    match mode {
        ResampleMode::None => Ok((m.clone(), ResampleReport::unchanged(m))),
        ResampleMode::Smote => {
            let out = smote_oversample(m, p)?;
            let report = ResampleReport {
                counts_before: m.class_counts(),
                synthetic_count: synthetic_counts(&out),
                counts_after: out.class_counts(),
                ..ResampleReport::default()
            };
            Ok((out, report))
        }
        ResampleMode::SmoteTomek => smote_tomek(m, p),
    }
}
