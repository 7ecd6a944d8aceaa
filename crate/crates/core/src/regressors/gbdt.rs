//! Stagewise gradient boosting with squared loss. Each stage is one
//! regression tree fit to the current residuals; the prefix sums of the
//! stages serve as checkpoints.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, TriageError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Exhaustive variance-reduction search over midpoints between consecutive
/// distinct values of every feature.
fn best_split(ds: &Dataset, rows: &[usize], target: &[f64], min_leaf: usize) -> Option<BestSplit> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| target[i]).sum();
    let parent = total * total / n as f64;
    let tol = 1e-12 * rows.iter().map(|&i| target[i] * target[i]).sum::<f64>();
    let mut best: Option<BestSplit> = None;
    let mut sorted = rows.to_vec();
    for f in 0..ds.dim() {
        sorted.sort_by(|&a, &b| ds.row(a)[f].total_cmp(&ds.row(b)[f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += target[sorted[k]];
            let n_left = k + 1;
            let x_here = ds.row(sorted[k])[f];
            let x_next = ds.row(sorted[k + 1])[f];
            if x_here == x_next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / (n - n_left) as f64
                - parent;
            if gain > tol
                && best.as_ref().is_none_or(|b| gain > b.gain)
            {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (x_here + x_next),
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    ds: &Dataset,
    rows: &[usize],
    target: &[f64],
    depth_left: usize,
    min_leaf: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let mean = rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64;
    nodes.push(Node::Leaf(mean));
    if depth_left == 0 {
        return id;
    }
    let Some(split) = best_split(ds, rows, target, min_leaf) else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| ds.row(i)[split.feature] <= split.threshold);
    let left = grow(ds, &l, target, depth_left - 1, min_leaf, nodes);
    let right = grow(ds, &r, target, depth_left - 1, min_leaf, nodes);
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

pub(crate) fn fit_tree(ds: &Dataset, target: &[f64], max_depth: usize, min_leaf: usize) -> Tree {
    let rows: Vec<usize> = (0..ds.len()).collect();
    let mut nodes = Vec::new();
    grow(ds, &rows, target, max_depth, min_leaf.max(1), &mut nodes);
    Tree { nodes }
}

/// Base prediction (target mean) and one tree per stage.
pub(crate) fn fit(
    train: &Dataset,
    stages: usize,
    learning_rate: f64,
    max_depth: usize,
    min_leaf: usize,
) -> Result<(f64, Vec<Tree>)> {
    if max_depth == 0 {
        return Err(TriageError::invalid("GBDT max depth must be >= 1"));
    }
    let y = train.targets();
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![base; y.len()];
    let mut trees = Vec::with_capacity(stages);
    for stage in 0..stages {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let tree = fit_tree(train, &residual, max_depth, min_leaf);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += learning_rate * tree.predict(train.row(i));
        }
        if pred.iter().any(|p| !p.is_finite()) {
            return Err(TriageError::Divergence { epoch: stage + 1, what: "prediction" });
        }
        trees.push(tree);
    }
    Ok((base, trees))
}
