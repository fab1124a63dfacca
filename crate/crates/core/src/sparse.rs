//! Compressed view of a dense [`FeatureMatrix`] for distance and dot
//! product kernels. TF-IDF rows hold a handful of nonzeros out of
//! thousands of columns.

use serde::{Deserialize, Serialize};

use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SparseRows {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        Self::from_dense(m.rows())
    }

    pub fn from_dense<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            offsets,
            indices,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Sum of squared coordinate differences, accumulated in column order.
    /// Skipped columns are zero in both rows and would add `0.0`, so the
    /// result is bit-identical to the dense loop.
    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        let (ia, va) = self.row(i);
        let (ib, vb) = self.row(j);
        sparse_squared_distance(ia, va, ib, vb)
    }
}

/// Squared Euclidean distance between two rows given as sorted
/// (column, value) lists, accumulated in column order.
pub(crate) fn sparse_squared_distance(ia: &[usize], va: &[f64], ib: &[usize], vb: &[f64]) -> f64 {
    let (mut p, mut q) = (0, 0);
    let mut acc = 0.0;
    while p < ia.len() || q < ib.len() {
        let ca = ia.get(p).copied().unwrap_or(usize::MAX);
        let cb = ib.get(q).copied().unwrap_or(usize::MAX);
        let d = if ca == cb {
            let d = va[p] - vb[q];
            p += 1;
            q += 1;
            d
        } else if ca < cb {
            let d = va[p];
            p += 1;
            d
        } else {
            let d = -vb[q];
            q += 1;
            d
        };
        acc += d * d;
    }
    acc
}

/// Nonzero (column, value) pairs of a dense row.
pub(crate) fn sparsify(row: &[f64]) -> (Vec<usize>, Vec<f64>) {
    row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(c, &v)| (c, v)).unzip()
}
