//! Building blocks of the decomposition program: the discretized Bateman
//! response linking driver to phasic, and the tonic regression basis.

use super::CvxEdaError;

/// Impulse-invariant discretization of `h(t) = exp(-t/tau0) - exp(-t/tau1)`.
///
/// The phasic series `r` and driver `p` obey
/// `r[i+1] + ar[1] r[i] + ar[2] r[i-1] = gain * p[i]`, so a unit driver
/// sample at `j` produces `dt * h((i - j) dt)` at every later sample `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatemanArma {
    pub tau0: f64,
    pub tau1: f64,
    pub dt: f64,
    /// Autoregressive polynomial `[1, -(p0 + p1), p0 p1]`.
    pub ar: [f64; 3],
    /// Moving-average polynomial `[0, dt (p0 - p1), 0]`.
    pub ma: [f64; 3],
    /// Poles `exp(-dt/tau0)` and `exp(-dt/tau1)`.
    pub poles: [f64; 2],
}

pub fn bateman_discretization(
    tau0: f64,
    tau1: f64,
    sample_rate: f64,
) -> Result<BatemanArma, CvxEdaError> {
    if !(tau1 > 0.0 && tau0 > tau1) || !tau0.is_finite() {
        return Err(CvxEdaError::InvalidTimeConstants { tau0, tau1 });
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(CvxEdaError::InvalidParams(format!(
            "sample rate {sample_rate} must be positive"
        )));
    }
    let dt = 1.0 / sample_rate;
    let p0 = (-dt / tau0).exp();
    let p1 = (-dt / tau1).exp();
    Ok(BatemanArma {
        tau0,
        tau1,
        dt,
        ar: [1.0, -(p0 + p1), p0 * p1],
        ma: [0.0, dt * (p0 - p1), 0.0],
        poles: [p0, p1],
    })
}

impl BatemanArma {
    pub fn gain(&self) -> f64 {
        self.ma[1]
    }

    /// Response to a unit driver impulse at sample 0, by running the recursion.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut r = vec![0.0; len];
        for i in 0..len {
            let mut v = if i == 1 { self.gain() } else { 0.0 };
            if i >= 1 {
                v -= self.ar[1] * r[i - 1];
            }
            if i >= 2 {
                v -= self.ar[2] * r[i - 2];
            }
            r[i] = v;
        }
        r
    }

    /// Continuous-time peak of the Bateman function.
    pub fn peak_time(&self) -> f64 {
        (self.tau0 / self.tau1).ln() * self.tau0 * self.tau1 / (self.tau0 - self.tau1)
    }

    /// Row coefficients of the driver operator: `p[j] = (c0 r[j-1] + c1 r[j] + c2 r[j+1])`.
    pub(crate) fn driver_stencil(&self) -> [f64; 3] {
        let g = self.gain();
        [self.ar[2] / g, self.ar[1] / g, 1.0 / g]
    }
}

/// Cubic B-spline value at distance `u` (in knot intervals) from its centre.
fn cubic_bspline(u: f64) -> f64 {
    let u = u.abs();
    if u < 1.0 {
        2.0 / 3.0 - u * u + 0.5 * u * u * u
    } else if u < 2.0 {
        let w = 2.0 - u;
        w * w * w / 6.0
    } else {
        0.0
    }
}

/// A column of the tonic basis with contiguous support.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisColumn {
    pub start: usize,
    pub values: Vec<f64>,
}

impl BasisColumn {
    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&x[self.start..self.end()])
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn axpy(&self, coef: f64, out: &mut [f64]) {
        for (o, v) in out[self.start..].iter_mut().zip(&self.values) {
            *o += coef * v;
        }
    }
}

/// Cubic B-splines on uniform knots followed by two drift columns
/// (constant and a linear ramp from 0 to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TonicBasis {
    pub n: usize,
    pub knot_step: usize,
    pub splines: Vec<BasisColumn>,
    pub drift: [BasisColumn; 2],
}

pub fn tonic_basis(n: usize, sample_rate: f64, knot_spacing: f64) -> TonicBasis {
    assert!(n >= 2, "basis needs at least two samples");
    let knot_step = ((knot_spacing * sample_rate).round() as usize).max(1);
    let last = n - 1;
    let mut splines = Vec::new();
    if last >= knot_step {
        let m = last.div_ceil(knot_step) as isize;
        let k = knot_step as isize;
        for centre_idx in -1..=m + 1 {
            let centre = centre_idx * k;
            let lo = (centre - 2 * k + 1).max(0);
            let hi = (centre + 2 * k - 1).min(last as isize);
            if lo > hi {
                continue;
            }
            let values = (lo..=hi)
                .map(|i| cubic_bspline((i - centre) as f64 / k as f64))
                .collect();
            splines.push(BasisColumn {
                start: lo as usize,
                values,
            });
        }
    }
    let ramp = (0..n).map(|i| i as f64 / last as f64).collect();
    TonicBasis {
        n,
        knot_step,
        splines,
        drift: [
            BasisColumn {
                start: 0,
                values: vec![1.0; n],
            },
            BasisColumn {
                start: 0,
                values: ramp,
            },
        ],
    }
}

impl TonicBasis {
    pub fn n_splines(&self) -> usize {
        self.splines.len()
    }

    pub fn n_columns(&self) -> usize {
        self.splines.len() + 2
    }

    pub fn columns(&self) -> impl Iterator<Item = &BasisColumn> {
        self.splines.iter().chain(self.drift.iter())
    }

    /// `Phi * coefs`, coefficients ordered splines first then drift.
    pub fn apply(&self, coefs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, &c) in self.columns().zip(coefs) {
            col.axpy(c, &mut out);
        }
        out
    }

    /// `Phi^T x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.columns().map(|c| c.dot(x)).collect()
    }

    /// Dense row-major `n x n_columns` copy, for diagnostics and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.n_columns()]; self.n];
        for (j, col) in self.columns().enumerate() {
            for (k, v) in col.values.iter().enumerate() {
                rows[col.start + k][j] = *v;
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_time_constants() {
        assert!(bateman_discretization(0.7, 2.0, 10.0).is_err());
        assert!(bateman_discretization(2.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn impulse_response_matches_sampled_bateman() {
        let arma = bateman_discretization(2.0, 0.7, 10.0).unwrap();
        let h = arma.impulse_response(400);
        assert_eq!(h[0], 0.0);
        for (i, v) in h.iter().enumerate() {
            let t = i as f64 * 0.1;
            let want = 0.1 * ((-t / 2.0).exp() - (-t / 0.7).exp());
            assert!((v - want).abs() < 1e-12, "sample {i}");
        }
        assert_eq!(arma.poles, [(-0.05f64).exp(), (-0.1f64 / 0.7).exp()]);
    }

    #[test]
    fn impulse_response_peak_and_decay() {
        let arma = bateman_discretization(2.0, 0.7, 10.0).unwrap();
        let h = arma.impulse_response(400);
        let (imax, hmax) = h
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        // analytic maximum: ln(tau0/tau1) tau0 tau1 / (tau0 - tau1) = 1.1306 s
        let t_peak = (2.0f64 / 0.7).ln() * 2.0 * 0.7 / 1.3;
        assert!((arma.peak_time() - t_peak).abs() < 1e-12);
        assert!((imax as f64 * 0.1 - t_peak).abs() <= 0.1);
        // 10 tau0 = 20 s = sample 200
        assert!(h[200] < 1e-3 * hmax);
    }

    #[test]
    fn short_span_has_drift_only() {
        let b = tonic_basis(50, 10.0, 10.0);
        assert_eq!(b.n_splines(), 0);
        assert_eq!(b.n_columns(), 2);
    }

    #[test]
    fn splines_partition_unity() {
        let b = tonic_basis(1234, 10.0, 10.0);
        let mut sum = vec![0.0; b.n];
        for col in &b.splines {
            col.axpy(1.0, &mut sum);
        }
        for v in sum {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_is_reproduced_by_equal_coefficients() {
        let b = tonic_basis(600, 10.0, 10.0);
        let mut coefs = vec![0.5; b.n_splines()];
        coefs.extend([0.0, 0.0]);
        for v in b.apply(&coefs) {
            assert!((v - 0.5).abs() < 1e-12);
        }
        // least squares through the spline columns alone recovers the same fit
        let dense = b.to_dense();
        let ns = b.n_splines();
        let a = nalgebra::DMatrix::from_fn(b.n, ns, |i, j| dense[i][j]);
        let y = nalgebra::DVector::from_element(b.n, 0.5);
        let sol = a.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let fit = &a * &sol;
        for v in fit.iter() {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let b = tonic_basis(321, 10.0, 10.0);
        let x: Vec<f64> = (0..321).map(|i| (i as f64 * 0.37).sin()).collect();
        let c: Vec<f64> = (0..b.n_columns()).map(|j| (j as f64).cos()).collect();
        let lhs: f64 = b.apply(&c).iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs: f64 = b.apply_transpose(&x).iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
