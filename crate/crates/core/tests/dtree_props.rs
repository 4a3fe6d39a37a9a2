use std::collections::HashMap;

use eaa_core::dtree::{
    fit_cart, CartParams, DecisionTreePolicy, Direction, LabeledSample, NodeKind, PartialTree,
};
use eaa_core::gridworld::StateFeatures;
use proptest::prelude::*;

/// Small integer-valued feature vectors, like the gridworld encoding.
fn dataset(max_len: usize) -> impl Strategy<Value = Vec<(Vec<u8>, usize)>> {
    (1usize..5).prop_flat_map(move |dim| {
        prop::collection::vec((prop::collection::vec(0u8..4, dim), 0usize..4), 1..max_len)
    })
}

fn to_samples(raw: &[(Vec<u8>, usize)]) -> Vec<LabeledSample<f64>> {
    raw.iter()
        .map(|(x, y)| {
            (
                StateFeatures::new(x.iter().map(|v| *v as f64).collect()),
                *y,
            )
        })
        .collect()
}

/// Make labels a function of the features: first label seen wins.
fn consistent(raw: Vec<(Vec<u8>, usize)>) -> Vec<(Vec<u8>, usize)> {
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    raw.into_iter()
        .map(|(x, y)| {
            let y = *seen.entry(x.clone()).or_insert(y);
            (x, y)
        })
        .collect()
}

/// Independent traversal: follow splits by hand from the root.
fn replay(tree: &DecisionTreePolicy<f64>, x: &[f64]) -> (usize, f64, Vec<usize>) {
    let mut id = tree.root();
    let mut visited = Vec::new();
    loop {
        visited.push(id.0);
        match &tree.nodes()[id.0].kind {
            NodeKind::Leaf(l) => return (l.action, l.probability, visited),
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                id = if x[*feature] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

fn grid_points(dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..4).map(move |v| {
                    let mut q = p.clone();
                    q.push(v as f64);
                    q
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unlimited_cart_fits_consistent_data(raw in dataset(40)) {
        let raw = consistent(raw);
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams { max_depth: None, min_samples_split: 2 }, vec![]).unwrap();
        for (x, y) in &data {
            prop_assert_eq!(tree.predict(x).unwrap().0, *y);
        }
    }

    #[test]
    fn leaf_probability_is_majority_fraction(raw in dataset(40)) {
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        for node in tree.nodes() {
            if let NodeKind::Leaf(l) = &node.kind {
                let total: usize = l.counts.iter().map(|(_, c)| c).sum();
                let best = l.counts.iter().map(|(_, c)| *c).max().unwrap();
                prop_assert!((l.probability - best as f64 / total as f64).abs() < 1e-12);
                let lowest = l.counts.iter().find(|(_, c)| *c == best).unwrap().0;
                prop_assert_eq!(l.action, lowest);
            }
        }
        // Leaf counts partition the dataset.
        let n: usize = tree.nodes().iter().filter_map(|n| match &n.kind {
            NodeKind::Leaf(l) => Some(l.counts.iter().map(|(_, c)| c).sum::<usize>()),
            _ => None,
        }).sum();
        prop_assert_eq!(n, data.len());
    }

    #[test]
    fn predict_and_path_agree_with_replay(raw in dataset(30)) {
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        for x in grid_points(tree.num_features()) {
            let (a, p, visited) = replay(&tree, &x);
            prop_assert_eq!(tree.predict(&x).unwrap(), (a, p));
            let path = tree.extract_path(&x).unwrap();
            prop_assert_eq!(path.action, a);
            prop_assert!(path.matches(&x));
            let ids: Vec<usize> = path.node_ids().iter().map(|n| n.0).collect();
            prop_assert_eq!(ids, visited);
        }
    }

    #[test]
    fn text_round_trip(raw in dataset(30)) {
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        let back = DecisionTreePolicy::<f64>::from_text(&tree.to_text()).unwrap();
        prop_assert_eq!(back.fingerprint(), tree.fingerprint());
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn partial_tree_properties(raw in dataset(30), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..12)) {
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        let points = grid_points(tree.num_features());
        let chosen: Vec<&Vec<f64>> = picks.iter().map(|i| i.get(&points)).collect();

        let mut forward = PartialTree::for_tree(&tree);
        for x in &chosen {
            forward.store_path(&tree.extract_path(x).unwrap()).unwrap();
        }
        let mut backward = PartialTree::for_tree(&tree);
        for x in chosen.iter().rev() {
            backward.store_path(&tree.extract_path(x).unwrap()).unwrap();
        }
        // Order of storage does not matter.
        prop_assert_eq!(&forward, &backward);
        // Storing again is a no-op.
        let mut again = forward.clone();
        for x in &chosen {
            again.store_path(&tree.extract_path(x).unwrap()).unwrap();
        }
        prop_assert_eq!(&again, &forward);

        prop_assert!(forward.is_subtree_of(&tree));
        prop_assert!(forward.tree_features().is_subset(&tree.tree_features()));

        // Exactly the union of stored path nodes.
        let mut expected: Vec<usize> = chosen.iter()
            .flat_map(|x| tree.extract_path(x).unwrap().node_ids())
            .map(|n| n.0)
            .collect();
        expected.sort_unstable();
        expected.dedup();
        let stored: Vec<usize> = forward.nodes().map(|(id, _)| id.0).collect();
        prop_assert_eq!(stored, expected);

        for y in &points {
            let full = tree.predict(y).unwrap();
            let leaf = tree.extract_path(y).unwrap().leaf;
            match forward.query(y) {
                // Anything decided agrees with the source tree.
                Some(ans) => prop_assert_eq!(ans, full),
                // Undecided only when y reaches a leaf no stored path covers.
                None => prop_assert!(!forward.contains(leaf)),
            }
            if forward.contains(leaf) {
                prop_assert_eq!(forward.query(y), Some(full));
            }
        }
    }

    #[test]
    fn stored_path_generalizes(raw in dataset(30), pick in any::<prop::sample::Index>()) {
        let data = to_samples(&raw);
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        let points = grid_points(tree.num_features());
        let x = pick.get(&points);
        let path = tree.extract_path(x).unwrap();
        let mut partial = PartialTree::for_tree(&tree);
        partial.store_path(&path).unwrap();
        for y in &points {
            if path.matches(y) {
                prop_assert_eq!(partial.query(y), Some((path.action, path.probability)));
            }
        }
        for step in &path.steps {
            prop_assert!(matches!(step.direction, Direction::Left | Direction::Right));
        }
    }
}
