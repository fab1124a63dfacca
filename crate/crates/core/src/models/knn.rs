//! Brute-force k-nearest-neighbour classifier (Euclidean).
//!
//! Neighbours with equal distance are ranked by training-row index. Vote
//! ties go to the class with the smaller summed neighbour distance, then to
//! the earlier class.

use serde::{Deserialize, Serialize};

use crate::sparse::{sparse_squared_distance, sparsify, SparseRows};
use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Stored training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    k: usize,
    rows: SparseRows,
    targets: Vec<usize>,
}

impl KnnIndex {
    pub fn predict_row(&self, x: &[f64], n_classes: usize) -> usize {
        let (qi, qv) = sparsify(x);
        let mut dist: Vec<(f64, usize)> = (0..self.rows.len())
            .map(|i| {
                let (ri, rv) = self.rows.row(i);
                (sparse_squared_distance(ri, rv, &qi, &qv), i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance);
            dist.truncate(k);
        }

        let mut votes = vec![0usize; n_classes];
        let mut summed = vec![0.0; n_classes];
        for &(d2, i) in &dist {
            let c = self.targets[i];
            votes[c] += 1;
            summed[c] += d2.sqrt();
        }
        let mut best = 0;
        for c in 1..n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best]) {
                best = c;
            }
        }
        best
    }
}

pub(crate) fn fit(m: &FeatureMatrix, y: &[usize], p: &KnnParams) -> KnnIndex {
    KnnIndex {
        k: p.k,
        rows: SparseRows::from_matrix(m),
        targets: y.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::models::{predict, train, ModelSpec};

    #[test]
    fn k1_recovers_training_labels() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let labels: Vec<Label> = (0..12).map(|i| Label::ALL[i % 4]).collect();
        let m = FeatureMatrix::from_rows(&rows, labels.clone()).unwrap();
        let model = train(&ModelSpec::knn(1), &m, 0).unwrap();
        assert_eq!(predict(&model, &m).unwrap(), labels);
    }

    #[test]
    fn majority_vote() {
        let m = FeatureMatrix::from_rows(
            &[vec![0.0, 0.1], vec![0.1, 0.0], vec![0.0, 0.2], vec![5.0, 5.0]],
            vec![Label::A, Label::A, Label::SE, Label::SE],
        )
        .unwrap();
        let model = train(&ModelSpec::knn(3), &m, 0).unwrap();
        let q = FeatureMatrix::from_rows(&[vec![0.0, 0.0]], vec![Label::A]).unwrap();
        assert_eq!(predict(&model, &q).unwrap(), vec![Label::A]);
    }

    #[test]
    fn vote_tie_goes_to_closer_class() {
        // k = 3 with three classes, one vote each: the nearest wins.
        let m = FeatureMatrix::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 0.5], vec![-2.0, 0.0]],
            vec![Label::A, Label::F, Label::US],
        )
        .unwrap();
        let model = train(&ModelSpec::knn(3), &m, 0).unwrap();
        let q = FeatureMatrix::from_rows(&[vec![0.0, 0.0]], vec![Label::A]).unwrap();
        assert_eq!(predict(&model, &q).unwrap(), vec![Label::F]);
    }

    #[test]
    fn k_larger_than_training_set() {
        let m = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], vec![Label::A, Label::A]).unwrap();
        let model = train(&ModelSpec::knn(7), &m, 0).unwrap();
        let q = FeatureMatrix::from_rows(&[vec![0.4]], vec![Label::A]).unwrap();
        assert_eq!(predict(&model, &q).unwrap(), vec![Label::A]);
    }
}
