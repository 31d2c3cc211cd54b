//! A single CART tree grown on (possibly repeated) row indices.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease produced by this split.
        gain: f64,
    },
    /// Regression: `[mean]`. Classification: per-class sample counts.
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Rows left out of this tree's bootstrap sample.
    pub oob: Vec<usize>,
}

pub(crate) struct GrowConfig {
    pub task: Task,
    pub n_classes: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// `y` holds targets for regression and class indices for classification.
pub(crate) struct Grower<'a, R: Rng> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub cfg: &'a GrowConfig,
    pub rng: R,
    pub nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    cost: f64,
    n_left: usize,
}

impl<R: Rng> Grower<'_, R> {
    fn class_counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.cfg.n_classes];
        for &i in idx {
            c[self.y[i] as usize] += 1.0;
        }
        c
    }

    /// Node impurity times node size.
    fn weighted_impurity(&self, idx: &[usize]) -> f64 {
        let n = idx.len() as f64;
        match self.cfg.task {
            Task::Regression => {
                let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
                idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum()
            }
            Task::Classification => {
                n - self.class_counts(idx).iter().map(|c| c * c).sum::<f64>() / n
            }
        }
    }

    fn leaf(&self, idx: &[usize]) -> Node {
        let value = match self.cfg.task {
            Task::Regression => vec![idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64],
            Task::Classification => self.class_counts(idx),
        };
        Node::Leaf { value }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == first)
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Best> {
        let p = self.x[0].len();
        let mut features = sample(&mut self.rng, p, self.cfg.features_per_split).into_vec();
        features.sort_unstable();
        let min_leaf = self.cfg.min_samples_leaf;
        let n = idx.len();
        let mut best: Option<Best> = None;
        let mut order = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut sweep = Sweep::new(self, &order);
            for k in 1..n {
                sweep.push(self, order[k - 1]);
                let (lo, hi) = (self.x[order[k - 1]][f], self.x[order[k]][f]);
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let cost = sweep.cost();
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Best {
                        feature: f,
                        threshold,
                        cost,
                        n_left: k,
                    });
                }
            }
        }
        best
    }

    pub fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let stop = self.cfg.max_depth.is_some_and(|d| depth >= d)
            || idx.len() < 2 * self.cfg.min_samples_leaf
            || self.is_pure(idx);
        let split = if stop { None } else { self.best_split(idx) };
        let Some(best) = split else {
            self.nodes[id] = self.leaf(idx);
            return id;
        };
        let parent = self.weighted_impurity(idx);
        let f = best.feature;
        idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        let (l, r) = idx.split_at_mut(best.n_left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: best.threshold,
            left,
            right,
            gain: (parent - best.cost).max(0.0),
        };
        id
    }
}

/// Running left/right statistics while sweeping sorted rows.
struct Sweep {
    task: Task,
    n: f64,
    left_n: f64,
    // regression: sums and sums of squares of targets shifted by the node mean
    offset: f64,
    total: (f64, f64),
    left: (f64, f64),
    // classification: class counts
    total_counts: Vec<f64>,
    left_counts: Vec<f64>,
}

impl Sweep {
    fn new<R: Rng>(g: &Grower<'_, R>, idx: &[usize]) -> Self {
        let mut total = (0.0, 0.0);
        let mut offset = 0.0;
        let mut total_counts = Vec::new();
        match g.cfg.task {
            Task::Regression => {
                offset = idx.iter().map(|&i| g.y[i]).sum::<f64>() / idx.len() as f64;
                for &i in idx {
                    let v = g.y[i] - offset;
                    total.0 += v;
                    total.1 += v * v;
                }
            }
            Task::Classification => total_counts = g.class_counts(idx),
        }
        Sweep {
            task: g.cfg.task,
            n: idx.len() as f64,
            left_n: 0.0,
            offset,
            total,
            left: (0.0, 0.0),
            left_counts: vec![0.0; total_counts.len()],
            total_counts,
        }
    }

    fn push<R: Rng>(&mut self, g: &Grower<'_, R>, i: usize) {
        self.left_n += 1.0;
        match self.task {
            Task::Regression => {
                let v = g.y[i] - self.offset;
                self.left.0 += v;
                self.left.1 += v * v;
            }
            Task::Classification => self.left_counts[g.y[i] as usize] += 1.0,
        }
    }

    /// Summed weighted impurity of both children.
    fn cost(&self) -> f64 {
        let nl = self.left_n;
        let nr = self.n - nl;
        match self.task {
            Task::Regression => {
                let (sl, ql) = self.left;
                let (sr, qr) = (self.total.0 - sl, self.total.1 - ql);
                (ql - sl * sl / nl) + (qr - sr * sr / nr)
            }
            Task::Classification => {
                let (mut gl, mut gr) = (0.0, 0.0);
                for (l, t) in self.left_counts.iter().zip(&self.total_counts) {
                    gl += l * l;
                    gr += (t - l) * (t - l);
                }
                (nl - gl / nl) + (nr - gr / nr)
            }
        }
    }
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}
