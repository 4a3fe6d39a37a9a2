//! Decision-tree policies and the explanation machinery built on them.
//!
//! [`fit_cart`] grows a classification tree over feature vectors.
//! [`DecisionTreePolicy::extract_path`] turns a prediction into a
//! [`DecisionPath`], and a [`PartialTree`] rebuilds the part of the source
//! tree covered by the paths it has been given.

mod cart;
mod partial;
mod tree;

use thiserror::Error;

pub use cart::{fit_cart, CartParams, LabeledSample};
pub use partial::{PartialNode, PartialTree};
pub use tree::{
    DecisionPath, DecisionTreePolicy, Fingerprint, Leaf, NodeId, NodeKind, PathStep, TreeNode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `x[feature] <= threshold`
    Left,
    /// `x[feature] > threshold`
    Right,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("cannot fit a tree on an empty dataset")]
    EmptyDataset,
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { expected: usize, got: usize },
    #[error("split references feature {0} outside the feature vector")]
    FeatureIndex(usize),
    #[error("node {0} is referenced but does not exist")]
    DanglingNode(NodeId),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("path comes from tree {got}, partial tree mirrors {expected}")]
    FingerprintMismatch {
        expected: Fingerprint,
        got: Fingerprint,
    },
    #[error("path conflicts with stored node {0}")]
    Conflict(NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::StateFeatures;

    fn sample(x: &[f64], y: usize) -> LabeledSample<f64> {
        (StateFeatures::new(x.to_vec()), y)
    }

    fn leaf(id: usize, action: usize) -> TreeNode<f64> {
        TreeNode {
            id: NodeId(id),
            kind: NodeKind::Leaf(Leaf {
                action,
                probability: 1.0,
                counts: vec![(action, 1)],
            }),
        }
    }

    fn split(id: usize, feature: usize, left: usize, right: usize) -> TreeNode<f64> {
        TreeNode {
            id: NodeId(id),
            kind: NodeKind::Split {
                feature,
                threshold: 0.5,
                left: NodeId(left),
                right: NodeId(right),
            },
        }
    }

    /// Root tests F1; its true branch tests F2. `F1 & !F2` selects action 1.
    pub(crate) fn fig2_tree() -> DecisionTreePolicy<f64> {
        DecisionTreePolicy::from_nodes(
            vec![
                split(0, 1, 1, 2),
                leaf(1, 0),
                split(2, 2, 3, 4),
                leaf(3, 1),
                leaf(4, 2),
            ],
            NodeId(0),
            vec!["F0".into(), "F1".into(), "F2".into()],
        )
        .unwrap()
    }

    #[test]
    fn forced_split() {
        let data = vec![sample(&[0.0], 0), sample(&[1.0], 1)];
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        assert_eq!(tree.len(), 3);
        match &tree.nodes()[0].kind {
            NodeKind::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict(&[0.0]).unwrap(), (0, 1.0));
        assert_eq!(tree.predict(&[1.0]).unwrap(), (1, 1.0));
    }

    #[test]
    fn pure_dataset_is_single_leaf() {
        let data = vec![sample(&[0.0, 1.0], 3), sample(&[2.0, 5.0], 3)];
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.predict(&[9.0, 9.0]).unwrap(), (3, 1.0));
        assert!(tree.tree_features().is_empty());
        let path = tree.extract_path(&[1.0, 1.0]).unwrap();
        assert!(path.steps.is_empty());
        assert_eq!(path.action, 3);
    }

    #[test]
    fn empty_dataset_errors() {
        let data: Vec<LabeledSample<f64>> = vec![];
        assert_eq!(
            fit_cart(&data, CartParams::default(), vec![]).unwrap_err(),
            TreeError::EmptyDataset
        );
    }

    #[test]
    fn ragged_dataset_errors() {
        let data = vec![sample(&[0.0], 0), sample(&[1.0, 2.0], 1)];
        assert!(matches!(
            fit_cart(&data, CartParams::default(), vec![]),
            Err(TreeError::FeatureLength { .. })
        ));
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Both features separate the labels perfectly.
        let data = vec![sample(&[0.0, 0.0], 0), sample(&[1.0, 1.0], 1)];
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        assert_eq!(
            tree.tree_features().into_iter().collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn xor_needs_zero_gain_split() {
        let data = vec![
            sample(&[0.0, 0.0], 0),
            sample(&[0.0, 1.0], 1),
            sample(&[1.0, 0.0], 1),
            sample(&[1.0, 1.0], 0),
        ];
        let tree = fit_cart(
            &data,
            CartParams {
                max_depth: None,
                min_samples_split: 2,
            },
            vec![],
        )
        .unwrap();
        for (x, y) in &data {
            assert_eq!(tree.predict(x).unwrap().0, *y);
        }
    }

    #[test]
    fn depth_limit_and_leaf_probability() {
        let data = vec![
            sample(&[0.0], 0),
            sample(&[0.0], 0),
            sample(&[0.0], 1),
            sample(&[1.0], 2),
        ];
        let stump = fit_cart(
            &data,
            CartParams {
                max_depth: Some(0),
                min_samples_split: 2,
            },
            vec![],
        )
        .unwrap();
        assert_eq!(stump.predict(&[0.0]).unwrap(), (0, 0.5));
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        let (a, p) = tree.predict(&[0.0]).unwrap();
        assert_eq!(a, 0);
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        match &tree.nodes()[tree.len() - 2].kind {
            NodeKind::Leaf(l) => assert_eq!(l.counts, vec![(0, 2), (1, 1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_samples_split_stops() {
        let data = vec![sample(&[0.0], 0), sample(&[1.0], 1), sample(&[2.0], 1)];
        let tree = fit_cart(
            &data,
            CartParams {
                max_depth: None,
                min_samples_split: 4,
            },
            vec![],
        )
        .unwrap();
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn fig2_path_replay() {
        let tree = fig2_tree();
        let x = [0.0, 1.0, 0.0];
        assert_eq!(tree.predict(&x).unwrap(), (1, 1.0));
        let path = tree.extract_path(&x).unwrap();
        assert_eq!(path.node_ids(), vec![NodeId(0), NodeId(2), NodeId(3)]);
        assert_eq!(path.steps[0].direction, Direction::Right);
        assert_eq!(path.steps[1].direction, Direction::Left);
        assert!(path.matches(&x));
        assert_eq!(
            path.describe(tree.feature_names()),
            "F1 > 0.5 & F2 <= 0.5 -> 1 (p=1)"
        );
    }

    #[test]
    fn right_right_path() {
        let tree = fig2_tree();
        let path = tree.extract_path(&[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(path.steps.len(), 2);
        assert!(path.steps.iter().all(|s| s.direction == Direction::Right));
        assert_eq!(path.action, 2);
    }

    #[test]
    fn dangling_child_is_reported() {
        let tree = DecisionTreePolicy::from_nodes(
            vec![split(0, 0, 1, 7), leaf(1, 0)],
            NodeId(0),
            vec!["a".into()],
        )
        .unwrap();
        assert_eq!(tree.predict(&[0.0]).unwrap().0, 0);
        assert_eq!(
            tree.predict(&[1.0]),
            Err(TreeError::DanglingNode(NodeId(7)))
        );
        assert!(tree.validate().is_err());
        assert!(matches!(
            tree.predict(&[1.0, 2.0]),
            Err(TreeError::FeatureLength { .. })
        ));
    }

    #[test]
    fn store_into_empty() {
        let tree = fig2_tree();
        let mut partial = PartialTree::for_tree(&tree);
        assert_eq!(partial.query(&[0.0, 0.0, 0.0]), None);
        partial
            .store_path(&tree.extract_path(&[0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(partial.len(), 2);
        assert_eq!(partial.query(&[0.0, 0.0, 1.0]), Some((0, 1.0)));
        // Routed right at the root: undecided.
        assert_eq!(partial.query(&[0.0, 1.0, 0.0]), None);
    }

    #[test]
    fn fig2_reconstruction_adds_only_missing_suffix() {
        let tree = fig2_tree();
        let mut partial = PartialTree::for_tree(&tree);
        partial
            .store_path(&tree.extract_path(&[0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let before: Vec<NodeId> = partial.nodes().map(|(id, _)| id).collect();
        assert_eq!(before, vec![NodeId(0), NodeId(1)]);
        partial
            .store_path(&tree.extract_path(&[0.0, 1.0, 0.0]).unwrap())
            .unwrap();
        let after: Vec<NodeId> = partial.nodes().map(|(id, _)| id).collect();
        assert_eq!(after, vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(partial.tree_features(), [1, 2].into_iter().collect());
        assert!(partial.is_subtree_of(&tree));
        assert_eq!(tree.tree_features(), [1, 2].into_iter().collect());
    }

    #[test]
    fn store_is_idempotent() {
        let tree = fig2_tree();
        let path = tree.extract_path(&[0.0, 1.0, 1.0]).unwrap();
        let mut once = PartialTree::for_tree(&tree);
        once.store_path(&path).unwrap();
        let mut twice = once.clone();
        twice.store_path(&path).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn foreign_path_rejected() {
        let tree = fig2_tree();
        let other = fit_cart(
            &[sample(&[0.0, 0.0, 0.0], 1)],
            CartParams::default(),
            vec![],
        )
        .unwrap();
        let mut partial = PartialTree::for_tree(&tree);
        let err = partial
            .store_path(&other.extract_path(&[0.0, 0.0, 0.0]).unwrap())
            .unwrap_err();
        assert!(matches!(err, TreeError::FingerprintMismatch { .. }));
        assert!(partial.is_empty());
    }

    #[test]
    fn text_round_trip() {
        let data: Vec<LabeledSample<f64>> = (0..40)
            .map(|i| {
                let x = [(i % 4) as f64, (i % 7) as f64 * 0.3, (i / 10) as f64];
                sample(&x, (i * 7 + i / 3) % 3)
            })
            .collect();
        let tree = fit_cart(
            &data,
            CartParams::default(),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let text = tree.to_text();
        let back = DecisionTreePolicy::<f64>::from_text(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.fingerprint(), tree.fingerprint());
        assert!(DecisionTreePolicy::<f64>::from_text("eaa-tree v1\nfeatures x\n").is_err());
    }

    #[test]
    fn dot_export_mentions_every_node() {
        let tree = fig2_tree();
        let dot = tree.to_dot(|a| format!("act{a}"));
        for i in 0..tree.len() {
            assert!(dot.contains(&format!("n{i} [")));
        }
        assert!(dot.contains("F1 <= 0.5"));
    }

    #[test]
    fn works_in_f32() {
        let data: Vec<LabeledSample<f32>> = vec![
            (StateFeatures::new(vec![0.0f32]), 0),
            (StateFeatures::new(vec![3.0f32]), 1),
        ];
        let tree = fit_cart(&data, CartParams::default(), vec![]).unwrap();
        assert_eq!(tree.predict(&[1.4f32]).unwrap(), (0, 1.0));
        assert_eq!(tree.predict(&[1.6f32]).unwrap(), (1, 1.0));
        let back = DecisionTreePolicy::<f32>::from_text(&tree.to_text()).unwrap();
        assert_eq!(back, tree);
    }
}
