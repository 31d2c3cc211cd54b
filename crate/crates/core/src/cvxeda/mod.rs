//! Convex decomposition of skin conductance into tonic and phasic parts.
//!
//! The phasic component is a sparse nonnegative driver convolved with a
//! Bateman kernel; the tonic component is a cubic spline plus a linear
//! drift. Both are recovered jointly by solving one quadratic program.

mod model;
mod solver;

pub use model::{bateman_discretization, tonic_basis, BasisColumn, BatemanArma, TonicBasis};
pub use solver::{DecompositionQp, KktResiduals, QpSolution};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvxEdaError {
    #[error("time constants must satisfy tau0 > tau1 > 0 (got {tau0}, {tau1})")]
    InvalidTimeConstants { tau0: f64, tau1: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("signal of {len} samples spans less than {min_seconds} s")]
    TooShort { len: usize, min_seconds: f64 },
    #[error("signal contains non-finite values")]
    NonFiniteInput,
    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },
}

/// Minimum signal duration accepted by [`decompose`].
pub const MIN_DURATION_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvxEdaParams {
    /// Slow Bateman time constant, seconds.
    pub tau0: f64,
    /// Fast Bateman time constant, seconds.
    pub tau1: f64,
    /// Spline knot spacing, seconds.
    pub knot_spacing: f64,
    /// Weight of the driver sparsity term.
    pub alpha: f64,
    /// Weight of the spline coefficient penalty.
    pub gamma: f64,
    pub solver_tol: f64,
    pub max_iters: usize,
}

impl Default for CvxEdaParams {
    fn default() -> Self {
        Self {
            tau0: 2.0,
            tau1: 0.7,
            knot_spacing: 10.0,
            alpha: 8e-4,
            gamma: 1e-2,
            solver_tol: 1e-6,
            max_iters: 50_000,
        }
    }
}

impl CvxEdaParams {
    pub fn validate(&self) -> Result<(), CvxEdaError> {
        if !(self.tau1 > 0.0 && self.tau0 > self.tau1) {
            return Err(CvxEdaError::InvalidTimeConstants {
                tau0: self.tau0,
                tau1: self.tau1,
            });
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0 && self.knot_spacing > 0.0) {
            return Err(CvxEdaError::InvalidParams(
                "alpha, gamma and knot_spacing must be positive".into(),
            ));
        }
        if !(self.solver_tol > 0.0) || self.max_iters == 0 {
            return Err(CvxEdaError::InvalidParams(
                "solver_tol and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub kkt: KktResiduals,
    /// Objective after every accepted step, starting from the all-zero driver.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub sample_rate: f64,
    /// Skin conductance level: spline plus drift.
    pub tonic: Vec<f64>,
    /// Skin conductance responses.
    pub phasic: Vec<f64>,
    /// Sparse nonnegative sudomotor driver.
    pub driver: Vec<f64>,
    pub residual: Vec<f64>,
    pub objective_value: f64,
    pub report: SolverReport,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.tonic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tonic.is_empty()
    }

    pub fn summary(&self) -> DecompositionSummary {
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
        DecompositionSummary {
            samples: self.len(),
            objective: self.objective_value,
            iterations: self.report.iterations,
            kkt_residual: self.report.kkt.max(),
            residual_rms: rms(&self.residual),
            residual_max: self.residual.iter().map(|v| v.abs()).fold(0.0, f64::max),
            driver_sum: self.driver.iter().sum(),
        }
    }

    /// `t_ms,tonic,phasic,driver,residual`
    pub fn write_csv<W: Write>(&self, start_ms: i64, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_ms,tonic,phasic,driver,residual")?;
        let period = 1000.0 / self.sample_rate;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                start_ms + (i as f64 * period).round() as i64,
                self.tonic[i],
                self.phasic[i],
                self.driver[i],
                self.residual[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub samples: usize,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub driver_sum: f64,
}

pub fn decompose(
    y: &[f64],
    sample_rate: f64,
    params: &CvxEdaParams,
) -> Result<Decomposition, CvxEdaError> {
    params.validate()?;
    let arma = bateman_discretization(params.tau0, params.tau1, sample_rate)?;
    let min_len = (MIN_DURATION_S * sample_rate).ceil() as usize;
    if y.len() < min_len.max(3) {
        return Err(CvxEdaError::TooShort {
            len: y.len(),
            min_seconds: MIN_DURATION_S,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CvxEdaError::NonFiniteInput);
    }
    let basis = tonic_basis(y.len(), sample_rate, params.knot_spacing);
    let qp = DecompositionQp::new(y, &arma, &basis, params.alpha, params.gamma);
    let sol = qp.solve(params.max_iters, params.solver_tol)?;

    let tonic = basis.apply(&sol.coefs);
    let residual = y
        .iter()
        .zip(&tonic)
        .zip(&sol.phasic)
        .map(|((y, t), p)| y - t - p)
        .collect();
    Ok(Decomposition {
        sample_rate,
        tonic,
        phasic: sol.phasic,
        driver: sol.driver,
        residual,
        objective_value: sol.objective,
        report: SolverReport {
            iterations: sol.iterations,
            kkt: sol.kkt,
            objective_trace: sol.objective_trace,
        },
    })
}
