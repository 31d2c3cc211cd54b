//! Per-window sympathetic indices: NSSCR from the phasic component, TVSymp
//! from complex demodulation and EDASymp from a Welch spectrum.

mod cdm;
mod scr;
mod spectral;
mod window;

pub use cdm::{cdm_decompose, cdm_min_len, tvsymp, BandAmplitude, TvSymp};
pub use scr::{detect_scrs, nsscr, ScrEvent, MERGE_DISTANCE_S};
pub use spectral::{edasymp, welch_psd, EdaSymp, Psd};
pub use window::{
    extract_window_features, read_features_csv, write_features_csv, WindowFeatureRow,
    FEATURES_HEADER, MIN_WINDOW_S,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;

/// Sample rate of the stream used for the frequency-domain indices.
pub const SPECTRAL_RATE: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("input of {len} samples is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("invalid feature parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Minimum trough-to-peak rise of an SCR, in the units of the phasic input.
    pub scr_min_amplitude: f64,
    pub tvsymp_band: (f64, f64),
    pub edasymp_band: (f64, f64),
    pub psd_window_len: usize,
    pub psd_overlap_fraction: f64,
    /// Fixed overlap in samples; overrides `psd_overlap_fraction` when set.
    pub psd_overlap_samples: Option<usize>,
    pub cdm_num_bands: usize,
    pub cdm_bandwidth: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            scr_min_amplitude: 0.01,
            tvsymp_band: (0.08, 0.24),
            edasymp_band: (0.045, 0.25),
            psd_window_len: 128,
            psd_overlap_fraction: 0.5,
            psd_overlap_samples: None,
            cdm_num_bands: 8,
            cdm_bandwidth: 0.125,
        }
    }
}

impl FeatureParams {
    /// One-sample segment overlap (0.5 s at 2 Hz) instead of 50%.
    pub fn strict_overlap(mut self) -> Self {
        self.psd_overlap_samples = Some(1);
        self
    }

    pub fn overlap_samples(&self) -> usize {
        self.psd_overlap_samples
            .unwrap_or((self.psd_overlap_fraction * self.psd_window_len as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let nyquist = SPECTRAL_RATE / 2.0;
        let bad = |msg: &str| Err(FeatureError::InvalidParams(msg.to_string()));
        for (name, (lo, hi)) in [("tvsymp_band", self.tvsymp_band), ("edasymp_band", self.edasymp_band)] {
            if !(lo >= 0.0 && lo < hi && hi < nyquist) {
                return Err(FeatureError::InvalidParams(format!(
                    "{name} must satisfy 0 <= lower < upper < {nyquist} Hz"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.psd_overlap_fraction) {
            return bad("psd_overlap_fraction must lie in [0, 1)");
        }
        if self.psd_window_len < 2 || self.overlap_samples() >= self.psd_window_len {
            return bad("psd_window_len must exceed the overlap");
        }
        if !(self.scr_min_amplitude > 0.0) {
            return bad("scr_min_amplitude must be positive");
        }
        if self.cdm_num_bands == 0 || !(self.cdm_bandwidth > 0.0) {
            return bad("cdm bands need a positive count and bandwidth");
        }
        if self.cdm_bandwidth * self.cdm_num_bands as f64 > nyquist + 1e-12 {
            return bad("cdm bands extend past Nyquist");
        }
        Ok(())
    }
}
