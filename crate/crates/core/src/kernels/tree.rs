//! Randomized CART regression trees grown on one subsample.
//!
//! At every node a feature subset of size `mtry` is drawn from the noise
//! stream, and the split minimizing the summed squared error of the two
//! children is chosen among midpoints of consecutive distinct feature
//! values. Candidates whose error lies within a relative `1e-9` of the best
//! are treated as tied and resolved by lowest feature index, then smallest
//! threshold; this keeps the chosen split stable under rounding, which in
//! turn keeps predictions exactly equivariant to response shifts.

use alloc::vec::Vec;

use crate::data::Row;
use crate::error::{Error, Result};
use crate::rng::Stream;

const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub mtry: usize,
    pub min_leaf: usize,
    /// `None` grows until the leaf-size rule or pure nodes stop recursion.
    pub max_depth: Option<usize>,
}

impl TreeParams {
    pub fn validate(&self, features: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > features {
            return Err(Error::param(
                "mtry",
                alloc::format!("must lie in 1..={features}, got {}", self.mtry),
            ));
        }
        if self.min_leaf == 0 {
            return Err(Error::param("min_leaf", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted regression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Grows a tree on `rows`, all of which must carry a response.
pub fn grow_tree(rows: &[Row<'_>], noise: &mut Stream, params: TreeParams) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::Input("cannot grow a tree on zero rows".into()));
    }
    let features = rows[0].features.len();
    params.validate(features)?;
    let mut y = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.features.len() != features {
            return Err(Error::Input(alloc::format!("row {i} has {} features, expected {features}", row.features.len())));
        }
        y.push(row.response.ok_or_else(|| Error::Input(alloc::format!("row {i} has no response")))?);
    }
    let mut grower = Grower {
        rows,
        y: &y,
        params,
        features,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    grower.grow(all, 0, noise);
    Ok(RegressionTree { nodes: grower.nodes })
}

struct Grower<'a, 'r> {
    rows: &'a [Row<'r>],
    y: &'a [f64],
    params: TreeParams,
    features: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    sse: f64,
}

impl Grower<'_, '_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, noise: &mut Stream) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(&idx)));

        let first = self.y[idx[0]];
        let constant = idx.iter().all(|&i| self.y[i] == first);
        let depth_reached = self.params.max_depth.is_some_and(|m| depth >= m);
        if constant || depth_reached || idx.len() < 2 * self.params.min_leaf {
            return id;
        }

        let mut subset = rand::seq::index::sample(noise, self.features, self.params.mtry).into_vec();
        subset.sort_unstable();

        let Some((feature, threshold)) = self.best_split(&idx, &subset) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i].features[feature] <= threshold);
        let left = self.grow(left_idx, depth + 1, noise);
        let right = self.grow(right_idx, depth + 1, noise);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, idx: &[usize], subset: &[usize]) -> Option<(usize, f64)> {
        let m = idx.len();
        let mean = self.leaf_value(idx);
        let centered = |i: usize| self.y[i] - mean;
        let node_sse: f64 = idx.iter().map(|&i| centered(i) * centered(i)).sum();
        let min_leaf = self.params.min_leaf;

        let mut candidates = Vec::new();
        let mut order = idx.to_vec();
        for &f in subset {
            let x = |i: usize| self.rows[i].features[f];
            order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
            let total: f64 = order.iter().map(|&i| centered(i)).sum();
            let total_sq: f64 = order.iter().map(|&i| centered(i) * centered(i)).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 1..m {
                let c = centered(order[k - 1]);
                s += c;
                sq += c * c;
                let (lo, hi) = (x(order[k - 1]), x(order[k]));
                if lo == hi || k < min_leaf || m - k < min_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (m - k) as f64);
                let sse_left = sq - s * s / nl;
                let rs = total - s;
                let sse_right = (total_sq - sq) - rs * rs / nr;
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                candidates.push(Candidate {
                    feature: f,
                    threshold,
                    sse: sse_left + sse_right,
                });
            }
        }
        let best = candidates.iter().map(|c| c.sse).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        let tol = TIE_TOLERANCE * node_sse.max(f64::MIN_POSITIVE);
        // Candidates are generated by ascending feature, then ascending threshold.
        candidates
            .iter()
            .find(|c| c.sse <= best + tol)
            .map(|c| (c.feature, c.threshold))
    }
}
