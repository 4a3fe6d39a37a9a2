use std::cmp::Ordering;

use super::tree::{DecisionTreePolicy, Leaf, NodeId, NodeKind, TreeNode};
use super::TreeError;
use crate::gridworld::StateFeatures;
use crate::scalar::Scalar;

/// Stopping rules for [`fit_cart`]. Defaults: depth 12, split needs 2
/// samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CartParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: Some(12),
            min_samples_split: 2,
        }
    }
}

/// A feature vector with its action label.
pub type LabeledSample<F> = (StateFeatures<F>, usize);

/// Split quality as the exact fraction `sum_l/n_l + sum_r/n_r`, where `sum`
/// is the sum of squared class counts. Maximizing it minimizes weighted Gini
/// impurity; comparing as integers keeps tie-breaking exact.
#[derive(Clone, Copy, Debug)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Score {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Best<F> {
    feature: usize,
    threshold: F,
    score: Score,
}

/// Greedy top-down CART with Gini impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct values of
/// each feature; `x <= threshold` goes left. The best split maximizes the
/// impurity decrease, ties going to the lowest feature index and then the
/// lowest threshold. A node becomes a leaf when it is pure, at the depth
/// limit, below `min_samples_split`, or has no candidate split.
pub fn fit_cart<F: Scalar>(
    data: &[LabeledSample<F>],
    params: CartParams,
    feature_names: Vec<String>,
) -> Result<DecisionTreePolicy<F>, TreeError> {
    let first = data.first().ok_or(TreeError::EmptyDataset)?;
    let dim = first.0.len();
    if let Some(bad) = data.iter().find(|(x, _)| x.len() != dim) {
        return Err(TreeError::FeatureLength {
            expected: dim,
            got: bad.0.len(),
        });
    }
    let names = if feature_names.is_empty() {
        (0..dim).map(|i| format!("x{i}")).collect()
    } else if feature_names.len() != dim {
        return Err(TreeError::FeatureLength {
            expected: feature_names.len(),
            got: dim,
        });
    } else {
        feature_names
    };
    let num_classes = data.iter().map(|(_, y)| *y).max().unwrap_or(0) + 1;
    let mut builder = Builder {
        data,
        params,
        dim,
        num_classes,
        nodes: Vec::new(),
    };
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let root = builder.grow(&mut indices, 0);
    DecisionTreePolicy::from_nodes(builder.nodes, root, names)
}

struct Builder<'a, F: Scalar> {
    data: &'a [LabeledSample<F>],
    params: CartParams,
    dim: usize,
    num_classes: usize,
    nodes: Vec<TreeNode<F>>,
}

impl<F: Scalar> Builder<'_, F> {
    fn counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &i in indices {
            c[self.data[i].1] += 1;
        }
        c
    }

    fn grow(&mut self, indices: &mut [usize], depth: usize) -> NodeId {
        let id = NodeId(self.nodes.len());
        let counts = self.counts(indices);
        let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
        let at_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || at_limit || indices.len() < self.params.min_samples_split.max(2) {
            None
        } else {
            self.best_split(indices)
        };

        let Some(best) = split else {
            self.nodes.push(TreeNode {
                id,
                kind: NodeKind::Leaf(make_leaf(&counts, indices.len())),
            });
            return id;
        };

        // Reserve the slot so children get later (preorder) ids.
        self.nodes.push(TreeNode {
            id,
            kind: NodeKind::Split {
                feature: best.feature,
                threshold: best.threshold,
                left: id,
                right: id,
            },
        });
        let (f, t) = (best.feature, best.threshold);
        let data = self.data;
        let mid = partition(indices, |i| data[i].0[f] <= t);
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id.0].kind = NodeKind::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }

    fn best_split(&self, indices: &[usize]) -> Option<Best<F>> {
        let n = indices.len() as u128;
        let total = self.counts(indices);
        let mut best: Option<Best<F>> = None;
        let mut order: Vec<usize> = indices.to_vec();
        for feature in 0..self.dim {
            let data = self.data;
            order.sort_by(|&a, &b| {
                data[a].0[feature]
                    .partial_cmp(&data[b].0[feature])
                    .unwrap_or(Ordering::Equal)
            });
            let mut left = vec![0u128; self.num_classes];
            let mut sq_left: u128 = 0;
            let mut sq_right: u128 = total.iter().map(|&c| (c as u128) * (c as u128)).sum();
            for k in 0..order.len() - 1 {
                let i = order[k];
                let y = data[i].1;
                // Moving one sample of class y from right to left.
                let l = left[y];
                let r = total[y] as u128 - l;
                sq_left += 2 * l + 1;
                sq_right -= 2 * r - 1;
                left[y] += 1;

                let lo = data[i].0[feature];
                let hi = data[order[k + 1]].0[feature];
                if lo >= hi {
                    continue;
                }
                let n_left = (k + 1) as u128;
                let score = Score::new(sq_left, n_left, sq_right, n - n_left);
                let better = match &best {
                    None => true,
                    Some(b) => score.cmp(&b.score) == Ordering::Greater,
                };
                if better {
                    let mut threshold = (lo + hi) / F::lit(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Majority class (lowest id on ties) with its empirical fraction.
fn make_leaf<F: Scalar>(counts: &[usize], total: usize) -> Leaf<F> {
    let mut action = 0;
    for (a, &c) in counts.iter().enumerate() {
        if c > counts[action] {
            action = a;
        }
    }
    Leaf {
        action,
        probability: F::from_usize_lossy(counts[action]) / F::from_usize_lossy(total.max(1)),
        counts: counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(a, c)| (a, *c))
            .collect(),
    }
}

/// Stable partition: elements satisfying `pred` first. Returns the split
/// point.
fn partition(indices: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| pred(i));
    let mid = yes.len();
    yes.extend(no);
    indices.copy_from_slice(&yes);
    mid
}
