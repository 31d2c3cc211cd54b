//! Random forests of CART trees, impurity importances and exact Shapley
//! attributions.

mod shapley;
mod tree;

pub use shapley::{
    exact_shapley, shap_summary_points, write_shap_points_csv, Model, ShapPoint,
    ShapleyAttribution, MAX_SHAPLEY_FEATURES,
};
pub use tree::{Node, Tree};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use tree::{GrowConfig, Grower};

/// Version tag of the serialized model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("need at least 2 rows and a non-empty train and test side, got {0} rows")]
    TooFewRows(usize),
    #[error("no training data")]
    EmptyData,
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("row has {got} features, model expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("non-finite value in training data")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` picks the task default.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn regression() -> Self {
        Self {
            n_trees: 500,
            max_depth: None,
            min_samples_leaf: 5,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }

    pub fn classification() -> Self {
        Self {
            n_trees: 2000,
            min_samples_leaf: 1,
            ..Self::regression()
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Self::regression(),
            Task::Classification => Self::classification(),
        }
    }

    /// ceil(p/3) for regression, ceil(sqrt p) for classification.
    pub fn resolved_features_per_split(&self, task: Task, p: usize) -> usize {
        self.features_per_split.unwrap_or(match task {
            Task::Regression => p.div_ceil(3),
            Task::Classification => (p as f64).sqrt().ceil() as usize,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub version: u32,
    pub task: Task,
    pub feature_names: Vec<String>,
    /// Sorted distinct class labels (classification only).
    pub classes: Vec<f64>,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

/// Deterministic shuffle, then the first `round(ratio * n)` rows train.
pub fn train_test_split(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ForestError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ForestError::InvalidParams(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let n_train = (ratio * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train == n {
        return Err(ForestError::TooFewRows(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit(
    x: &[Vec<f64>],
    y: &[f64],
    task: Task,
    feature_names: &[String],
    params: &ForestParams,
) -> Result<RandomForest, ForestError> {
    let n = x.len();
    if n == 0 || y.is_empty() {
        return Err(ForestError::EmptyData);
    }
    if y.len() != n {
        return Err(ForestError::InvalidParams(format!("{n} rows but {} targets", y.len())));
    }
    let p = feature_names.len();
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(ForestError::ArityMismatch { expected: p, got: row.len() });
    }
    if p == 0 {
        return Err(ForestError::EmptyData);
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    let mtry = params.resolved_features_per_split(task, p);
    if params.n_trees == 0 || mtry == 0 || mtry > p || params.min_samples_leaf == 0 {
        return Err(ForestError::InvalidParams(format!(
            "n_trees {} features_per_split {mtry} of {p} min_samples_leaf {}",
            params.n_trees, params.min_samples_leaf
        )));
    }
    let (targets, classes) = match task {
        Task::Regression => {
            if y.iter().all(|v| *v == y[0]) {
                return Err(ForestError::DegenerateTarget("regression target has zero variance".into()));
            }
            (y.to_vec(), Vec::new())
        }
        Task::Classification => {
            let mut classes = y.to_vec();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            if classes.len() < 2 {
                return Err(ForestError::DegenerateTarget("classification needs at least two classes".into()));
            }
            let t = y
                .iter()
                .map(|v| classes.iter().position(|c| c == v).unwrap() as f64)
                .collect();
            (t, classes)
        }
    };
    let cfg = GrowConfig {
        task,
        n_classes: classes.len(),
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: mtry,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let (mut idx, oob) = if params.bootstrap {
                let mut seen = vec![false; n];
                let idx: Vec<usize> = (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        seen[i] = true;
                        i
                    })
                    .collect();
                let oob = (0..n).filter(|&i| !seen[i]).collect();
                (idx, oob)
            } else {
                ((0..n).collect(), Vec::new())
            };
            let mut g = Grower {
                x,
                y: &targets,
                cfg: &cfg,
                rng,
                nodes: Vec::new(),
            };
            g.grow(&mut idx, 0);
            Tree { nodes: g.nodes, oob }
        })
        .collect();
    Ok(RandomForest {
        version: MODEL_FORMAT_VERSION,
        task,
        feature_names: feature_names.to_vec(),
        classes,
        params: *params,
        trees,
    })
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check(&self, row: &[f64]) -> Result<(), ForestError> {
        if row.len() != self.n_features() {
            return Err(ForestError::ArityMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Mean of leaf means (regression) or majority class label (classification).
    pub fn predict(&self, row: &[f64]) -> Result<f64, ForestError> {
        self.check(row)?;
        Ok(match self.task {
            Task::Regression => self.regress(row),
            Task::Classification => {
                let proba = self.votes(row);
                let best = proba
                    .iter()
                    .enumerate()
                    .fold(0, |b, (k, v)| if *v > proba[b] { k } else { b });
                self.classes[best]
            }
        })
    }

    /// Vote shares per class, in `classes` order.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>, ForestError> {
        self.check(row)?;
        if self.task != Task::Classification {
            return Err(ForestError::InvalidParams("predict_proba needs a classifier".into()));
        }
        Ok(self.votes(row))
    }

    fn regress(&self, row: &[f64]) -> f64 {
        running_mean(self.trees.iter().map(|t| t.leaf_for(row)[0]))
    }

    fn votes(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes.len()];
        for t in &self.trees {
            let counts = t.leaf_for(row);
            let k = counts
                .iter()
                .enumerate()
                .fold(0, |b, (k, v)| if *v > counts[b] { k } else { b });
            votes[k] += 1.0;
        }
        let total = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }

    /// Scalar output explained by Shapley values: the prediction for
    /// regression, the vote-weighted class label for classification.
    pub fn output(&self, row: &[f64]) -> f64 {
        match self.task {
            Task::Regression => self.regress(row),
            Task::Classification => self
                .votes(row)
                .iter()
                .zip(&self.classes)
                .map(|(p, c)| p * c)
                .sum(),
        }
    }

    /// Mean decrease in impurity, normalized per tree and then overall.
    pub fn impurity_importance(&self) -> Vec<f64> {
        let p = self.n_features();
        let mut acc = vec![0.0; p];
        for t in &self.trees {
            let mut per = vec![0.0; p];
            for node in &t.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    per[*feature] += gain;
                }
            }
            let s: f64 = per.iter().sum();
            if s > 0.0 {
                acc.iter_mut().zip(&per).for_each(|(a, v)| *a += v / s);
            }
        }
        let s: f64 = acc.iter().sum();
        if s > 0.0 {
            acc.iter_mut().for_each(|a| *a /= s);
        }
        acc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: RandomForest = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(format!("unsupported model version {}", m.version));
        }
        Ok(m)
    }
}

/// Incremental mean; exact when all values are equal.
pub(crate) fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    for (k, v) in values.enumerate() {
        m += (v - m) / (k + 1) as f64;
    }
    m
}

/// 1 - SSE/SST on held-out rows.
pub fn evaluate_regression(model: &RandomForest, x: &[Vec<f64>], y: &[f64]) -> Result<f64, ForestError> {
    if y.is_empty() {
        return Err(ForestError::EmptyData);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(ForestError::DegenerateTarget("test target has zero variance".into()));
    }
    let mut sse = 0.0;
    for (row, v) in x.iter().zip(y) {
        sse += (v - model.predict(row)?).powi(2);
    }
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Ascending class labels indexing both axes.
    pub labels: Vec<f64>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[f64], predicted: &[f64]) -> Self {
        let mut labels: Vec<f64> = truth.iter().chain(predicted).copied().collect();
        labels.sort_by(f64::total_cmp);
        labels.dedup();
        let pos = |v: f64| labels.iter().position(|l| *l == v).unwrap();
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[pos(*t)][pos(*p)] += 1;
        }
        Self { labels, counts }
    }

    pub fn accuracy(&self) -> f64 {
        let total: usize = self.counts.iter().flatten().sum();
        let hit: usize = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

pub fn evaluate_classification(
    model: &RandomForest,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<(f64, ConfusionMatrix), ForestError> {
    let predicted = x.iter().map(|r| model.predict(r)).collect::<Result<Vec<_>, _>>()?;
    let cm = ConfusionMatrix::from_pairs(y, &predicted);
    Ok((cm.accuracy(), cm))
}
