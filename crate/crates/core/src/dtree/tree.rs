use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use super::{Direction, TreeError};
use crate::scalar::{parse_scalar, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stable identity of a fitted tree (FNV-1a over its canonical text form).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf<F> {
    pub action: usize,
    /// Majority-class fraction of the training samples at this leaf.
    pub probability: F,
    /// `(action, count)` pairs sorted by action.
    pub counts: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind<F> {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: F,
        left: NodeId,
        right: NodeId,
    },
    Leaf(Leaf<F>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode<F> {
    pub id: NodeId,
    pub kind: NodeKind<F>,
}

/// One predicate on a decision path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStep<F> {
    pub node: NodeId,
    pub feature: usize,
    pub threshold: F,
    pub direction: Direction,
}

impl<F: Scalar> PathStep<F> {
    pub fn holds(&self, x: &[F]) -> bool {
        let goes_left = x[self.feature] <= self.threshold;
        goes_left == (self.direction == Direction::Left)
    }
}

/// A root-to-leaf explanation: the predicates satisfied by a state and the
/// leaf they select.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionPath<F> {
    pub source: Fingerprint,
    pub steps: Vec<PathStep<F>>,
    pub leaf: NodeId,
    pub action: usize,
    pub probability: F,
}

impl<F: Scalar> DecisionPath<F> {
    /// Node ids from the root to the leaf.
    pub fn node_ids(&self) -> Vec<NodeId> {
        self.steps
            .iter()
            .map(|s| s.node)
            .chain(std::iter::once(self.leaf))
            .collect()
    }

    pub fn features(&self) -> BTreeSet<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }

    /// Whether every predicate holds for `x`.
    pub fn matches(&self, x: &[F]) -> bool {
        self.steps.iter().all(|s| s.holds(x))
    }

    /// Conjunction of predicates using `names`, e.g.
    /// `medic_room <= 0.5 & victim_present[b] > 0.5 -> 3 (p=1)`.
    pub fn describe(&self, names: &[String]) -> String {
        let preds: Vec<String> = self
            .steps
            .iter()
            .map(|s| {
                let name = names
                    .get(s.feature)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", s.feature));
                match s.direction {
                    Direction::Left => format!("{name} <= {}", s.threshold),
                    Direction::Right => format!("{name} > {}", s.threshold),
                }
            })
            .collect();
        let body = if preds.is_empty() {
            "true".to_string()
        } else {
            preds.join(" & ")
        };
        format!("{body} -> {} (p={})", self.action, self.probability)
    }
}

/// Binary classification tree mapping feature vectors to action ids.
///
/// Nodes live in an arena indexed by [`NodeId`]; trees produced by
/// [`super::fit_cart`] number nodes in preorder.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTreePolicy<F> {
    nodes: Vec<TreeNode<F>>,
    root: NodeId,
    feature_names: Vec<String>,
}

const MAGIC: &str = "eaa-tree v1";

impl<F: Scalar> DecisionTreePolicy<F> {
    /// Builds a tree from an arena. Node `i` must carry id `i`; child links
    /// are checked lazily by traversal.
    pub fn from_nodes(
        nodes: Vec<TreeNode<F>>,
        root: NodeId,
        feature_names: Vec<String>,
    ) -> Result<Self, TreeError> {
        if let Some((i, n)) = nodes.iter().enumerate().find(|(i, n)| n.id.0 != *i) {
            return Err(TreeError::Malformed(format!(
                "node at slot {i} has id {}",
                n.id
            )));
        }
        if root.0 >= nodes.len() {
            return Err(TreeError::DanglingNode(root));
        }
        Ok(DecisionTreePolicy {
            nodes,
            root,
            feature_names,
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode<F>> {
        self.nodes.get(id.0)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn go<F>(t: &DecisionTreePolicy<F>, id: NodeId) -> usize {
            match t.nodes.get(id.0).map(|n| &n.kind) {
                Some(NodeKind::Split { left, right, .. }) => 1 + go(t, *left).max(go(t, *right)),
                _ => 0,
            }
        }
        go(self, self.root)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(fnv1a(self.to_text().as_bytes()))
    }

    fn check_len(&self, x: &[F]) -> Result<(), TreeError> {
        if x.len() != self.feature_names.len() {
            return Err(TreeError::FeatureLength {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Root-to-leaf traversal; returns the leaf's action and probability.
    pub fn predict(&self, x: &[F]) -> Result<(usize, F), TreeError> {
        let leaf = self.leaf_for(x)?;
        Ok((leaf.action, leaf.probability))
    }

    fn leaf_for(&self, x: &[F]) -> Result<&Leaf<F>, TreeError> {
        self.check_len(x)?;
        let mut id = self.root;
        loop {
            let node = self.nodes.get(id.0).ok_or(TreeError::DanglingNode(id))?;
            match &node.kind {
                NodeKind::Leaf(leaf) => return Ok(leaf),
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = *x.get(*feature).ok_or(TreeError::FeatureIndex(*feature))?;
                    id = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// The predicates and node ids visited by [`Self::predict`] on `x`.
    pub fn extract_path(&self, x: &[F]) -> Result<DecisionPath<F>, TreeError> {
        self.check_len(x)?;
        let mut steps = Vec::new();
        let mut id = self.root;
        loop {
            let node = self.nodes.get(id.0).ok_or(TreeError::DanglingNode(id))?;
            match &node.kind {
                NodeKind::Leaf(leaf) => {
                    return Ok(DecisionPath {
                        source: self.fingerprint(),
                        steps,
                        leaf: id,
                        action: leaf.action,
                        probability: leaf.probability,
                    })
                }
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = *x.get(*feature).ok_or(TreeError::FeatureIndex(*feature))?;
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
                        Direction::Left => *left,
                        Direction::Right => *right,
                    };
                }
            }
        }
    }

    /// Feature indices tested by any split node.
    pub fn tree_features(&self) -> BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf(_) => None,
            })
            .collect()
    }

    /// Canonical text form: header, feature names, root, then one node per
    /// line in id order.
    ///
    /// ```text
    /// eaa-tree v1
    /// features 2
    /// feature 0 medic_room
    /// feature 1 rubble[a]
    /// root 0
    /// nodes 3
    /// node 0 split 0 0.5 1 2
    /// node 1 leaf 3 1 3:12
    /// node 2 leaf 0 0.75 0:3,2:1
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        self.write_body(&mut out);
        out
    }

    pub(crate) fn write_body(&self, out: &mut String) {
        let _ = writeln!(out, "features {}", self.feature_names.len());
        for (i, name) in self.feature_names.iter().enumerate() {
            let _ = writeln!(out, "feature {i} {name}");
        }
        let _ = writeln!(out, "root {}", self.root);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(
                        out,
                        "node {} split {feature} {threshold} {left} {right}",
                        node.id
                    );
                }
                NodeKind::Leaf(leaf) => {
                    let counts = leaf
                        .counts
                        .iter()
                        .map(|(a, c)| format!("{a}:{c}"))
                        .collect::<Vec<_>>()
                        .join(",");
                    let _ = writeln!(
                        out,
                        "node {} leaf {} {} {}",
                        node.id, leaf.action, leaf.probability, counts
                    );
                }
            }
        }
    }

    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => {
                return Err(TreeError::Parse {
                    line: 1,
                    message: format!("expected `{MAGIC}`"),
                })
            }
        }
        Self::read_body(&mut lines)
    }

    pub(crate) fn read_body<'a, I>(lines: &mut std::iter::Peekable<I>) -> Result<Self, TreeError>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let perr = |line: usize, message: String| TreeError::Parse { line, message };
        let mut next = |what: &str| -> Result<(usize, Vec<String>), TreeError> {
            let (line, text) = lines
                .next()
                .ok_or_else(|| perr(0, format!("unexpected end of input, expected {what}")))?;
            let toks: Vec<String> = text.split_whitespace().map(String::from).collect();
            if toks.first().map(String::as_str) != Some(what) {
                return Err(perr(line, format!("expected `{what}` line")));
            }
            Ok((line, toks))
        };
        let num = |line: usize, s: &str| -> Result<usize, TreeError> {
            s.parse()
                .map_err(|_| perr(line, format!("bad integer `{s}`")))
        };

        let (line, t) = next("features")?;
        let nf = num(line, t.get(1).map_or("", String::as_str))?;
        let mut names = Vec::with_capacity(nf);
        for i in 0..nf {
            let (line, t) = next("feature")?;
            if t.len() != 3 || num(line, &t[1])? != i {
                return Err(perr(line, format!("expected `feature {i} <name>`")));
            }
            names.push(t[2].clone());
        }
        let (line, t) = next("root")?;
        let root = NodeId(num(line, t.get(1).map_or("", String::as_str))?);
        let (line, t) = next("nodes")?;
        let nn = num(line, t.get(1).map_or("", String::as_str))?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (line, t) = next("node")?;
            let id = NodeId(num(line, t.get(1).map_or("", String::as_str))?);
            let kind = match t.get(2).map(String::as_str) {
                Some("split") if t.len() == 7 => NodeKind::Split {
                    feature: num(line, &t[3])?,
                    threshold: parse_scalar(&t[4]).map_err(|m| perr(line, m))?,
                    left: NodeId(num(line, &t[5])?),
                    right: NodeId(num(line, &t[6])?),
                },
                Some("leaf") if t.len() == 5 || t.len() == 6 => {
                    let mut counts = Vec::new();
                    if let Some(c) = t.get(5) {
                        for pair in c.split(',') {
                            let (a, n) = pair
                                .split_once(':')
                                .ok_or_else(|| perr(line, format!("bad count `{pair}`")))?;
                            counts.push((num(line, a)?, num(line, n)?));
                        }
                    }
                    NodeKind::Leaf(Leaf {
                        action: num(line, &t[3])?,
                        probability: parse_scalar(&t[4]).map_err(|m| perr(line, m))?,
                        counts,
                    })
                }
                _ => return Err(perr(line, "expected `node <id> split|leaf ...`".into())),
            };
            nodes.push(TreeNode { id, kind });
        }
        let tree = Self::from_nodes(nodes, root, names)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Checks child links and feature indices, and that every node is
    /// reachable from the root exactly once.
    pub fn validate(&self) -> Result<(), TreeError> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = self.nodes.get(id.0).ok_or(TreeError::DanglingNode(id))?;
            if std::mem::replace(&mut seen[id.0], true) {
                return Err(TreeError::Malformed(format!("node {id} reached twice")));
            }
            if let NodeKind::Split {
                feature,
                left,
                right,
                ..
            } = &node.kind
            {
                if *feature >= self.feature_names.len() {
                    return Err(TreeError::FeatureIndex(*feature));
                }
                stack.push(*right);
                stack.push(*left);
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(TreeError::Malformed(format!(
                "node {orphan} unreachable from root"
            )));
        }
        Ok(())
    }

    /// Graphviz rendering; `label` names action ids.
    pub fn to_dot(&self, label: impl Fn(usize) -> String) -> String {
        let mut out = String::from("digraph policy {\n  node [shape=box];\n");
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let name = self
                        .feature_names
                        .get(*feature)
                        .cloned()
                        .unwrap_or_else(|| format!("x{feature}"));
                    let _ = writeln!(out, "  n{} [label=\"{} <= {}\"];", node.id, name, threshold);
                    let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", node.id, left);
                    let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", node.id, right);
                }
                NodeKind::Leaf(leaf) => {
                    let _ = writeln!(
                        out,
                        "  n{} [label=\"{} (p={})\", shape=ellipse];",
                        node.id,
                        label(leaf.action),
                        leaf.probability
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
