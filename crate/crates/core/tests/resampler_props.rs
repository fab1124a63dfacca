use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use reqclass::corpus::Label;
use reqclass::resampler::{
    find_tomek_links, remove_tomek_majority, resample, smote_oversample, smote_tomek, ResampleMode, SmoteParams,
};
use reqclass::vectorizer::{FeatureMatrix, RowOrigin};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sparse-ish rows: each coordinate is zero half the time, otherwise a
/// small integer (to provoke distance ties) or a real in [0, 1).
fn matrix_strategy(max_rows: usize, dims: usize) -> impl Strategy<Value = FeatureMatrix> {
    (2..=max_rows, 1usize..=3).prop_flat_map(move |(n, k)| {
        let cell = prop_oneof![
            2 => Just(0.0),
            1 => (0u8..3).prop_map(f64::from),
            1 => 0.0f64..1.0,
        ];
        (
            proptest::collection::vec(proptest::collection::vec(cell, dims), n),
            proptest::collection::vec(0..k, n),
        )
            .prop_map(|(rows, ys)| {
                let labels = ys.into_iter().map(|c| Label::ALL[c]).collect();
                FeatureMatrix::from_rows(&rows, labels).unwrap()
            })
    })
}

fn counts(m: &FeatureMatrix) -> BTreeMap<Label, usize> {
    m.class_counts()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn smote_balances_and_keeps_originals(m in matrix_strategy(30, 4), k in 1usize..6, seed in any::<u64>()) {
        let out = smote_oversample(&m, &SmoteParams { k_neighbors: k, seed }).unwrap();
        let target = *counts(&m).values().max().unwrap();
        prop_assert!(counts(&out).values().all(|&c| c == target));
        prop_assert_eq!(counts(&out).into_keys().collect::<Vec<_>>(), counts(&m).into_keys().collect::<Vec<_>>());
        for i in 0..m.n_rows() {
            prop_assert_eq!(out.row(i), m.row(i));
            prop_assert_eq!(out.labels()[i], m.labels()[i]);
        }
        prop_assert!(out.origins()[m.n_rows()..].iter().all(|o| o.is_synthetic()));
    }

    #[test]
    fn synthetic_rows_lie_between_same_class_neighbours(m in matrix_strategy(30, 4), k in 1usize..6, seed in any::<u64>()) {
        let out = smote_oversample(&m, &SmoteParams { k_neighbors: k, seed }).unwrap();
        for i in m.n_rows()..out.n_rows() {
            let RowOrigin::Synthetic { base, neighbor } = out.origins()[i] else { unreachable!() };
            let label = out.labels()[i];
            prop_assert_eq!(m.labels()[base], label);
            prop_assert_eq!(m.labels()[neighbor], label);
            for (c, &v) in out.row(i).iter().enumerate() {
                let (a, b) = (m.row(base)[c], m.row(neighbor)[c]);
                prop_assert!(a.min(b) <= v && v <= a.max(b));
            }
            // the neighbour is within the k nearest same-class rows of the base
            let members: Vec<usize> = (0..m.n_rows()).filter(|&j| m.labels()[j] == label).collect();
            if members.len() > 1 {
                prop_assert_ne!(base, neighbor);
                let d = sq_dist(m.row(base), m.row(neighbor));
                let closer = members
                    .iter()
                    .filter(|&&j| j != base && sq_dist(m.row(base), m.row(j)) < d)
                    .count();
                prop_assert!(closer < k);
            }
        }
    }

    #[test]
    fn smote_is_a_function_of_the_seed(m in matrix_strategy(20, 3), seed in any::<u64>()) {
        let p = SmoteParams { k_neighbors: 3, seed };
        prop_assert_eq!(smote_oversample(&m, &p).unwrap(), smote_oversample(&m, &p).unwrap());
    }

    #[test]
    fn links_are_mutual_nearest_neighbours_with_different_labels(m in matrix_strategy(40, 5)) {
        let n = m.n_rows();
        let nn: Vec<usize> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .min_by(|&a, &b| sq_dist(m.row(i), m.row(a)).total_cmp(&sq_dist(m.row(i), m.row(b))).then(a.cmp(&b)))
                    .unwrap()
            })
            .collect();
        let expected: BTreeSet<(usize, usize)> = (0..n)
            .filter(|&i| i < nn[i] && nn[nn[i]] == i && m.labels()[i] != m.labels()[nn[i]])
            .map(|i| (i, nn[i]))
            .collect();
        let links = find_tomek_links(&m);
        let got: BTreeSet<(usize, usize)> = links.iter().map(|l| (l.index_a, l.index_b)).collect();
        prop_assert_eq!(got.len(), links.len());
        prop_assert_eq!(got, expected);
        for l in &links {
            prop_assert_eq!(l.label_a, m.labels()[l.index_a]);
            prop_assert_eq!(l.label_b, m.labels()[l.index_b]);
        }
    }

    #[test]
    fn removal_drops_only_majority_link_members(m in matrix_strategy(40, 3)) {
        let links = find_tomek_links(&m);
        let (out, report) = remove_tomek_majority(&m, &links).unwrap();
        let original = counts(&m);
        let members: BTreeSet<usize> = links.iter().flat_map(|l| [l.index_a, l.index_b]).collect();
        let removed: BTreeSet<usize> = report.removed_indices.iter().copied().collect();
        prop_assert!(removed.is_subset(&members));
        for l in &links {
            let (ca, cb) = (original[&l.label_a], original[&l.label_b]);
            prop_assert_eq!(removed.contains(&l.index_a), ca >= cb);
            prop_assert_eq!(removed.contains(&l.index_b), cb >= ca);
        }
        prop_assert_eq!(out.n_rows(), m.n_rows() - removed.len());
        prop_assert_eq!(report.counts_after, counts(&out));
        prop_assert_eq!(report.link_count, links.len());
    }

    #[test]
    fn smote_tomek_report_adds_up(m in matrix_strategy(30, 3), seed in any::<u64>()) {
        let (out, report) = smote_tomek(&m, &SmoteParams { k_neighbors: 5, seed }).unwrap();
        prop_assert_eq!(&report.counts_before, &counts(&m));
        prop_assert_eq!(&report.counts_after, &counts(&out));
        let before: usize = report.counts_before.values().sum();
        let synthetic: usize = report.synthetic_count.values().sum();
        let after: usize = report.counts_after.values().sum();
        prop_assert_eq!(after, before + synthetic - report.removed_indices.len());
    }

    #[test]
    fn mode_none_is_the_identity(m in matrix_strategy(20, 3)) {
        let (out, report) = resample(&m, ResampleMode::None, &SmoteParams::default()).unwrap();
        prop_assert_eq!(&out, &m);
        prop_assert!(report.removed_indices.is_empty() && report.synthetic_count.is_empty());
    }

    #[test]
    fn links_from_a_larger_matrix_are_stale(m in matrix_strategy(30, 3)) {
        let links = find_tomek_links(&m);
        prop_assume!(!links.is_empty());
        let top = links.iter().map(|l| l.index_a.max(l.index_b)).max().unwrap();
        let rows: Vec<Vec<f64>> = (0..top).map(|i| m.row(i).to_vec()).collect();
        prop_assume!(!rows.is_empty());
        let truncated = FeatureMatrix::from_rows(&rows, m.labels()[..top].to_vec()).unwrap();
        let is_stale = matches!(
            remove_tomek_majority(&truncated, &links),
            Err(reqclass::Error::StaleLinks { rows, .. }) if rows == top
        );
        prop_assert!(is_stale);
    }
}
