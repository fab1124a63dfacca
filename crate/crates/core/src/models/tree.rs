//! CART classification tree with Gini impurity.
//!
//! A node that is impure, below `max_depth` and holds at least
//! `min_samples_split` rows is always split on the best available threshold,
//! even when the impurity decrease is zero (XOR-shaped data needs that).
//! Ties between candidate splits go to the lower feature index, then the
//! lower threshold. No pruning.
//!
//! Split search only visits the nonzero entries of the rows in a node; the
//! zero entries of each feature form one implicit block.

use serde::{Deserialize, Serialize};

use crate::sparse::SparseRows;
use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 32,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Gini impurity `1 − Σ p_c²` of a class-count vector.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    rows: &'a SparseRows,
    y: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, members: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in members {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn build(&mut self, members: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&members);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || members.len() < self.params.min_samples_split {
            return id;
        }
        let Some(split) = self.best_split(&members, &counts) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| self.value(i, split.feature) <= split.threshold);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn value(&self, i: usize, feature: usize) -> f64 {
        let (idx, vals) = self.rows.row(i);
        idx.binary_search(&feature).map_or(0.0, |p| vals[p])
    }

    /// Weighted child impurity `n_l·gini_l + n_r·gini_r`, minimised.
    fn best_split(&self, members: &[usize], counts: &[usize]) -> Option<SplitChoice> {
        let k = self.n_classes;
        let n = members.len();
        let mut entries: Vec<(usize, f64, usize)> = Vec::new();
        for &i in members {
            let (idx, vals) = self.rows.row(i);
            entries.extend(idx.iter().zip(vals).map(|(&f, &v)| (f, v, self.y[i])));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut best: Option<SplitChoice> = None;
        let mut blocks: Vec<(f64, Vec<usize>)> = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let feature = entries[start].0;
            let mut end = start;
            while end < entries.len() && entries[end].0 == feature {
                end += 1;
            }
            // Distinct values of this feature, zeros included, ascending.
            blocks.clear();
            let mut zeros = counts.to_vec();
            for &(_, v, c) in &entries[start..end] {
                zeros[c] -= 1;
                match blocks.last_mut() {
                    Some((bv, bc)) if *bv == v => bc[c] += 1,
                    _ => {
                        let mut bc = vec![0; k];
                        bc[c] = 1;
                        blocks.push((v, bc));
                    }
                }
            }
            if zeros.iter().any(|&z| z > 0) {
                let at = blocks.partition_point(|(v, _)| *v < 0.0);
                blocks.insert(at, (0.0, zeros));
            }

            let mut left = vec![0usize; k];
            let mut n_left = 0;
            for w in 0..blocks.len().saturating_sub(1) {
                for (l, &c) in left.iter_mut().zip(&blocks[w].1) {
                    *l += c;
                }
                n_left += blocks[w].1.iter().sum::<usize>();
                let right: Vec<usize> = counts.iter().zip(&left).map(|(&t, &l)| t - l).collect();
                let score = n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let (lo, hi) = (blocks[w].0, blocks[w + 1].0);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
            start = end;
        }
        best
    }
}

pub(crate) fn fit(m: &FeatureMatrix, y: &[usize], n_classes: usize, p: &TreeParams) -> Tree {
    let rows = SparseRows::from_matrix(m);
    let mut b = Builder {
        rows: &rows,
        y,
        n_classes,
        params: p,
        nodes: Vec::new(),
    };
    b.build((0..m.n_rows()).collect(), 0);
    Tree { nodes: b.nodes }
}
