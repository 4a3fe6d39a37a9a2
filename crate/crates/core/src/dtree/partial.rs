use std::collections::{BTreeMap, BTreeSet};

use super::tree::{DecisionPath, DecisionTreePolicy, Fingerprint, NodeId, NodeKind, PathStep};
use super::{Direction, TreeError};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub enum PartialNode<F> {
    Split {
        feature: usize,
        threshold: F,
        left: Option<NodeId>,
        right: Option<NodeId>,
    },
    Leaf {
        action: usize,
        probability: F,
    },
}

/// A student's reconstruction of part of a source tree, assembled from
/// received decision paths. Nodes keep their source ids; a split may be
/// missing either child, in which case queries routed there are undecided.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialTree<F> {
    source: Fingerprint,
    root: Option<NodeId>,
    nodes: BTreeMap<NodeId, PartialNode<F>>,
}

impl<F: Scalar> PartialTree<F> {
    pub fn new(source: Fingerprint) -> Self {
        PartialTree {
            source,
            root: None,
            nodes: BTreeMap::new(),
        }
    }

    /// Empty partial tree for paths from `tree`.
    pub fn for_tree(tree: &DecisionTreePolicy<F>) -> Self {
        Self::new(tree.fingerprint())
    }

    pub fn source(&self) -> Fingerprint {
        self.source
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&PartialNode<F>> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &PartialNode<F>)> {
        self.nodes.iter().map(|(id, n)| (*id, n))
    }

    /// Merges a decision path: finds the first path node not yet present and
    /// attaches it and every later node under its parent on the recorded
    /// branch. Existing node contents are never changed.
    pub fn store_path(&mut self, path: &DecisionPath<F>) -> Result<(), TreeError> {
        if path.source != self.source {
            return Err(TreeError::FingerprintMismatch {
                expected: self.source,
                got: path.source,
            });
        }
        let ids = path.node_ids();
        let content = |k: usize| -> PartialNode<F> {
            match path.steps.get(k) {
                Some(step) => PartialNode::Split {
                    feature: step.feature,
                    threshold: step.threshold,
                    left: None,
                    right: None,
                },
                None => PartialNode::Leaf {
                    action: path.action,
                    probability: path.probability,
                },
            }
        };

        // Validate before mutating so a conflicting path leaves the tree as is.
        let mut k = 0;
        while k < ids.len() && self.nodes.contains_key(&ids[k]) {
            if !same_content(&self.nodes[&ids[k]], &content(k)) {
                return Err(TreeError::Conflict(ids[k]));
            }
            if k > 0 && self.child(ids[k - 1], path.steps[k - 1].direction) != Some(ids[k]) {
                return Err(TreeError::Conflict(ids[k]));
            }
            k += 1;
        }
        if k == ids.len() {
            return Ok(());
        }
        if k == 0 {
            if self.root.is_some() {
                return Err(TreeError::Conflict(ids[0]));
            }
        } else if self
            .child(ids[k - 1], path.steps[k - 1].direction)
            .is_some()
        {
            return Err(TreeError::Conflict(ids[k - 1]));
        }

        for j in k..ids.len() {
            self.nodes.insert(ids[j], content(j));
            if j == 0 {
                self.root = Some(ids[0]);
            } else {
                self.attach(ids[j - 1], path.steps[j - 1].direction, ids[j]);
            }
        }
        Ok(())
    }

    fn child(&self, parent: NodeId, dir: Direction) -> Option<NodeId> {
        match self.nodes.get(&parent) {
            Some(PartialNode::Split { left, right, .. }) => match dir {
                Direction::Left => *left,
                Direction::Right => *right,
            },
            _ => None,
        }
    }

    fn attach(&mut self, parent: NodeId, dir: Direction, child: NodeId) {
        if let Some(PartialNode::Split { left, right, .. }) = self.nodes.get_mut(&parent) {
            match dir {
                Direction::Left => *left = Some(child),
                Direction::Right => *right = Some(child),
            }
        }
    }

    /// Traverses like the source tree; `None` (undecided) as soon as a
    /// required child is missing.
    pub fn query(&self, x: &[F]) -> Option<(usize, F)> {
        self.path_for(x).map(|p| (p.action, p.probability))
    }

    /// The stored path `x` follows to a leaf, if the partial tree decides `x`.
    pub fn path_for(&self, x: &[F]) -> Option<DecisionPath<F>> {
        let mut id = self.root?;
        let mut steps = Vec::new();
        loop {
            match self.nodes.get(&id)? {
                PartialNode::Leaf {
                    action,
                    probability,
                } => {
                    return Some(DecisionPath {
                        source: self.source,
                        steps,
                        leaf: id,
                        action: *action,
                        probability: *probability,
                    })
                }
                PartialNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = *x.get(*feature)?;
                    let direction = if v <= *threshold {
                        Direction::Left
                    } else {
                        Direction::Right
                    };
                    steps.push(PathStep {
                        node: id,
                        feature: *feature,
                        threshold: *threshold,
                        direction,
                    });
                    id = match direction {
                        Direction::Left => (*left)?,
                        Direction::Right => (*right)?,
                    };
                }
            }
        }
    }

    /// Feature indices tested by any stored split.
    pub fn tree_features(&self) -> BTreeSet<usize> {
        self.nodes
            .values()
            .filter_map(|n| match n {
                PartialNode::Split { feature, .. } => Some(*feature),
                PartialNode::Leaf { .. } => None,
            })
            .collect()
    }

    /// Sub-tree property: every stored node matches the source node with the
    /// same id, and every stored child link is a source child link.
    pub fn is_subtree_of(&self, tree: &DecisionTreePolicy<F>) -> bool {
        if tree.fingerprint() != self.source {
            return false;
        }
        if let Some(root) = self.root {
            if root != tree.root() {
                return false;
            }
        }
        self.nodes.iter().all(|(id, node)| {
            let Some(src) = tree.node(*id) else {
                return false;
            };
            match (node, &src.kind) {
                (
                    PartialNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    },
                    NodeKind::Split {
                        feature: sf,
                        threshold: st,
                        left: sl,
                        right: sr,
                    },
                ) => {
                    feature == sf
                        && threshold == st
                        && left.is_none_or(|l| l == *sl)
                        && right.is_none_or(|r| r == *sr)
                }
                (
                    PartialNode::Leaf {
                        action,
                        probability,
                    },
                    NodeKind::Leaf(leaf),
                ) => *action == leaf.action && *probability == leaf.probability,
                _ => false,
            }
        })
    }
}

fn same_content<F: Scalar>(a: &PartialNode<F>, b: &PartialNode<F>) -> bool {
    match (a, b) {
        (
            PartialNode::Split {
                feature: fa,
                threshold: ta,
                ..
            },
            PartialNode::Split {
                feature: fb,
                threshold: tb,
                ..
            },
        ) => fa == fb && ta == tb,
        (
            PartialNode::Leaf {
                action: aa,
                probability: pa,
            },
            PartialNode::Leaf {
                action: ab,
                probability: pb,
            },
        ) => aa == ab && pa == pb,
        _ => false,
    }
}
