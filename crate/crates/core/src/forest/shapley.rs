use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ForestError, RandomForest};

/// Subset enumeration is 2^p model evaluations per background row.
pub const MAX_SHAPLEY_FEATURES: usize = 12;

/// Anything mapping a feature row to one real output.
pub trait Model: Sync {
    fn eval(&self, row: &[f64]) -> f64;
}

impl Model for RandomForest {
    fn eval(&self, row: &[f64]) -> f64 {
        self.output(row)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Model for F {
    fn eval(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub values: Vec<f64>,
    /// Mean model output over the background set.
    pub base_value: f64,
    pub prediction: f64,
}

impl ShapleyAttribution {
    pub fn efficiency_gap(&self) -> f64 {
        (self.values.iter().sum::<f64>() + self.base_value - self.prediction).abs()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Interventional Shapley values by enumerating all feature coalitions.
/// Features outside a coalition take each background row's values in turn.
pub fn exact_shapley<M: Model + ?Sized>(
    model: &M,
    row: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapleyAttribution, ForestError> {
    let p = row.len();
    if p > MAX_SHAPLEY_FEATURES {
        return Err(ForestError::TooManyFeatures {
            got: p,
            max: MAX_SHAPLEY_FEATURES,
        });
    }
    if background.is_empty() {
        return Err(ForestError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != p) {
        return Err(ForestError::ArityMismatch {
            expected: p,
            got: b.len(),
        });
    }
    let n_masks = 1usize << p;
    let mut scratch = vec![0.0; p];
    let value: Vec<f64> = (0..n_masks)
        .map(|mask| {
            let mut sum = 0.0;
            for b in background {
                for j in 0..p {
                    scratch[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
                }
                sum += model.eval(&scratch);
            }
            sum / background.len() as f64
        })
        .collect();

    // weight(|S|) = |S|! (p - |S| - 1)!, divided by p! once at the end
    let weights: Vec<f64> = (0..p).map(|s| factorial(s) * factorial(p - s - 1)).collect();
    let total = factorial(p);
    let values = (0..p)
        .map(|i| {
            let bit = 1 << i;
            let mut acc = 0.0;
            for mask in (0..n_masks).filter(|m| m & bit == 0) {
                let s = (mask as u32).count_ones() as usize;
                acc += weights[s] * (value[mask | bit] - value[mask]);
            }
            acc / total
        })
        .collect();
    let attribution = ShapleyAttribution {
        values,
        base_value: value[0],
        prediction: model.eval(row),
    };
    debug_assert!(attribution.efficiency_gap() <= 1e-6 * attribution.prediction.abs().max(1.0));
    Ok(attribution)
}

/// One beeswarm point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapPoint {
    pub row: usize,
    pub feature: usize,
    pub feature_value: f64,
    /// Midrank percentile of the feature value within the row set, in [0, 1].
    pub percentile: f64,
    pub shap: f64,
}

fn midrank_percentiles(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n == 1 {
        return vec![0.5];
    }
    let ranks = crate::stats::midranks(v);
    ranks.iter().map(|r| (r - 1.0) / (n - 1) as f64).collect()
}

/// Points for every (row, feature) pair, ordered by row then feature.
pub fn shap_summary_points<M: Model + ?Sized>(
    model: &M,
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
) -> Result<Vec<ShapPoint>, ForestError> {
    let attributions = rows
        .par_iter()
        .map(|r| exact_shapley(model, r, background))
        .collect::<Result<Vec<_>, _>>()?;
    let p = rows.first().map_or(0, Vec::len);
    let percentiles: Vec<Vec<f64>> = (0..p)
        .map(|j| midrank_percentiles(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    Ok(attributions
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            let percentiles = &percentiles;
            a.values.iter().enumerate().map(move |(j, &shap)| ShapPoint {
                row: i,
                feature: j,
                feature_value: rows[i][j],
                percentile: percentiles[j][i],
                shap,
            })
        })
        .collect())
}

/// `row,feature,feature_value,percentile,shap`
pub fn write_shap_points_csv<W: Write>(
    points: &[ShapPoint],
    feature_names: &[String],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "feature", "feature_value", "percentile", "shap"])?;
    for pt in points {
        w.write_record([
            pt.row.to_string(),
            feature_names[pt.feature].clone(),
            pt.feature_value.to_string(),
            pt.percentile.to_string(),
            pt.shap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
