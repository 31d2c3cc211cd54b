//! Effective run parameters: defaults, then a flat dotted-key JSON file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::cvxeda::CvxEdaParams;
use crate::dsp::CleanParams;
use crate::features::FeatureParams;
use crate::forest::ForestParams;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineToggles {
    pub clean: bool,
    pub normalize: bool,
    pub decompose: bool,
    pub lowpass_hz: f64,
    pub lowpass_order: usize,
}

impl Default for PipelineToggles {
    fn default() -> Self {
        Self {
            clean: true,
            normalize: true,
            decompose: true,
            lowpass_hz: 1.5,
            lowpass_order: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub pipeline: PipelineToggles,
    pub clean: CleanParams,
    pub features: FeatureParams,
    pub cvxeda: CvxEdaParams,
    /// Forest settings; `None` fields fall back to the task defaults.
    pub forest: ForestOverrides,
    pub split_ratio: f64,
    /// Seed from the file; flags and `DERMALAB_SEED` are resolved by the caller.
    pub seed: Option<u64>,
    /// Cap on the number of training rows used as the Shapley background.
    pub background_max: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ForestOverrides {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub features_per_split: Option<usize>,
    pub bootstrap: Option<bool>,
}

impl ForestOverrides {
    pub fn resolve(&self, mut base: ForestParams, seed: u64) -> ForestParams {
        if let Some(v) = self.n_trees {
            base.n_trees = v;
        }
        if self.max_depth.is_some() {
            base.max_depth = self.max_depth;
        }
        if let Some(v) = self.min_samples_leaf {
            base.min_samples_leaf = v;
        }
        if self.features_per_split.is_some() {
            base.features_per_split = self.features_per_split;
        }
        if let Some(v) = self.bootstrap {
            base.bootstrap = v;
        }
        base.seed = seed;
        base
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineToggles::default(),
            clean: CleanParams::default(),
            features: FeatureParams::default(),
            cvxeda: CvxEdaParams::default(),
            forest: ForestOverrides::default(),
            split_ratio: 0.7,
            seed: None,
            background_max: 64,
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    v.as_f64()
        .ok_or_else(|| CliError::Usage(format!("config key `{key}` expects a number")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize, CliError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| CliError::Usage(format!("config key `{key}` expects a non-negative integer")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool, CliError> {
    v.as_bool()
        .ok_or_else(|| CliError::Usage(format!("config key `{key}` expects true or false")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
        let map: BTreeMap<String, Value> = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &Value) -> Result<(), CliError> {
        match key {
            "pipeline.clean" => self.pipeline.clean = as_bool(key, v)?,
            "pipeline.normalize" => self.pipeline.normalize = as_bool(key, v)?,
            "pipeline.decompose" => self.pipeline.decompose = as_bool(key, v)?,
            "pipeline.lowpass_hz" => self.pipeline.lowpass_hz = as_f64(key, v)?,
            "pipeline.lowpass_order" => self.pipeline.lowpass_order = as_usize(key, v)?,
            "clean.z_threshold" => self.clean.z_threshold = as_f64(key, v)?,
            "features.scr_min_amplitude" => self.features.scr_min_amplitude = as_f64(key, v)?,
            "features.psd_window_len" => self.features.psd_window_len = as_usize(key, v)?,
            "features.psd_overlap_fraction" => self.features.psd_overlap_fraction = as_f64(key, v)?,
            "features.psd_overlap_samples" => {
                self.features.psd_overlap_samples = if v.is_null() { None } else { Some(as_usize(key, v)?) }
            }
            "features.cdm_num_bands" => self.features.cdm_num_bands = as_usize(key, v)?,
            "features.cdm_bandwidth" => self.features.cdm_bandwidth = as_f64(key, v)?,
            "cvxeda.tau0" => self.cvxeda.tau0 = as_f64(key, v)?,
            "cvxeda.tau1" => self.cvxeda.tau1 = as_f64(key, v)?,
            "cvxeda.knot_spacing" => self.cvxeda.knot_spacing = as_f64(key, v)?,
            "cvxeda.alpha" => self.cvxeda.alpha = as_f64(key, v)?,
            "cvxeda.gamma" => self.cvxeda.gamma = as_f64(key, v)?,
            "cvxeda.solver_tol" => self.cvxeda.solver_tol = as_f64(key, v)?,
            "cvxeda.max_iters" => self.cvxeda.max_iters = as_usize(key, v)?,
            "forest.n_trees" => self.forest.n_trees = Some(as_usize(key, v)?),
            "forest.max_depth" => self.forest.max_depth = Some(as_usize(key, v)?),
            "forest.min_samples_leaf" => self.forest.min_samples_leaf = Some(as_usize(key, v)?),
            "forest.features_per_split" => self.forest.features_per_split = Some(as_usize(key, v)?),
            "forest.bootstrap" => self.forest.bootstrap = Some(as_bool(key, v)?),
            "split.ratio" => self.split_ratio = as_f64(key, v)?,
            "seed" => self.seed = Some(v
                .as_u64()
                .ok_or_else(|| CliError::Usage("config key `seed` expects a non-negative integer".into()))?),
            "analyze.background_max" => self.background_max = as_usize(key, v)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(CliError::Usage(format!("split ratio {} must lie in (0, 1)", self.split_ratio)));
        }
        if self.background_max == 0 {
            return Err(CliError::Usage("analyze.background_max must be positive".into()));
        }
        self.features
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.cvxeda
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}
