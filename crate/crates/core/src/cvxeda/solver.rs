//! Primal active-set solver for the decomposition QP.
//!
//! Variables are the phasic series `r` (length `n`) and the tonic
//! coefficients `u` (splines then drift). The program is
//!
//! ```text
//! minimize  0.5 |r + Phi u - y|^2 + alpha 1'(D r) + 0.5 gamma |u_spline|^2
//! s.t.      D r >= 0
//! ```
//!
//! where `D` is the banded driver operator (three coefficients per row).
//! Each iteration solves the equality-constrained subproblem for the current
//! working set exactly: the constrained rows couple through the pentadiagonal
//! Gram matrix `D_W D_W'`, factored in O(n), and the tonic block is
//! eliminated through a small dense Schur complement. Iterates stay feasible
//! and the objective never increases.

use nalgebra::{DMatrix, DVector};

use super::model::{BatemanArma, TonicBasis};
use super::CvxEdaError;

/// Multipliers below `-DROP_TOL` release their constraint.
const DROP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub phasic: Vec<f64>,
    pub coefs: Vec<f64>,
    pub driver: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Infinity-norm residuals of the optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_infeasibility)
            .max(self.dual_infeasibility)
            .max(self.complementarity)
    }
}

/// The assembled program. Constraint `k` is driver sample `k + 1`.
pub struct DecompositionQp<'a> {
    y: &'a [f64],
    basis: &'a TonicBasis,
    stencil: [f64; 3],
    alpha: f64,
    gamma: f64,
    /// `D' 1`
    driver_sum: Vec<f64>,
    /// Rows of `D Phi`, stored per basis column as (first row, values).
    d_phi: Vec<(usize, Vec<f64>)>,
}

impl<'a> DecompositionQp<'a> {
    pub fn new(
        y: &'a [f64],
        arma: &BatemanArma,
        basis: &'a TonicBasis,
        alpha: f64,
        gamma: f64,
    ) -> Self {
        let n = y.len();
        assert!(n >= 3 && basis.n == n);
        let stencil = arma.driver_stencil();
        let mut qp = Self {
            y,
            basis,
            stencil,
            alpha,
            gamma,
            driver_sum: Vec::new(),
            d_phi: Vec::new(),
        };
        qp.driver_sum = qp.apply_dt(&vec![1.0; n - 2]);
        qp.d_phi = basis
            .columns()
            .map(|col| {
                let mut dense = vec![0.0; n];
                col.axpy(1.0, &mut dense);
                let lo = col.start.saturating_sub(2);
                let hi = col.end().min(n - 2);
                let rows = qp.apply_d(&dense);
                (lo, rows[lo..hi].to_vec())
            })
            .collect();
        qp
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.n() - 2
    }

    fn n_coefs(&self) -> usize {
        self.basis.n_columns()
    }

    fn penalty(&self, j: usize) -> f64 {
        if j < self.basis.n_splines() {
            self.gamma
        } else {
            0.0
        }
    }

    /// Driver values `D r` (length `n - 2`).
    pub fn apply_d(&self, r: &[f64]) -> Vec<f64> {
        let [c0, c1, c2] = self.stencil;
        r.windows(3)
            .map(|w| c0 * w[0] + c1 * w[1] + c2 * w[2])
            .collect()
    }

    fn apply_d_row(&self, k: usize, r: &[f64]) -> f64 {
        let [c0, c1, c2] = self.stencil;
        c0 * r[k] + c1 * r[k + 1] + c2 * r[k + 2]
    }

    /// `D' v` for `v` of length `n - 2`.
    pub fn apply_dt(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.scatter_dt(v.iter().copied().enumerate(), &mut out);
        out
    }

    fn scatter_dt(&self, entries: impl Iterator<Item = (usize, f64)>, out: &mut [f64]) {
        let [c0, c1, c2] = self.stencil;
        for (k, v) in entries {
            out[k] += c0 * v;
            out[k + 1] += c1 * v;
            out[k + 2] += c2 * v;
        }
    }

    fn d_phi_entry(&self, col: usize, k: usize) -> f64 {
        let (lo, vals) = &self.d_phi[col];
        if k < *lo {
            0.0
        } else {
            vals.get(k - lo).copied().unwrap_or(0.0)
        }
    }

    pub fn objective(&self, r: &[f64], coefs: &[f64]) -> f64 {
        let tonic = self.basis.apply(coefs);
        let fit: f64 = r
            .iter()
            .zip(&tonic)
            .zip(self.y)
            .map(|((a, b), y)| (a + b - y).powi(2))
            .sum();
        let sparsity: f64 = self.driver_sum.iter().zip(r).map(|(s, v)| s * v).sum();
        let smooth: f64 = coefs
            .iter()
            .enumerate()
            .map(|(j, c)| self.penalty(j) * c * c)
            .sum();
        0.5 * fit + self.alpha * sparsity + 0.5 * smooth
    }

    /// Minimizer of the objective subject to `D_k r = 0` for every `k` in
    /// `working` (sorted ascending). Returns `(r, coefs, multipliers)`.
    fn solve_equality(&self, working: &[usize]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CvxEdaError> {
        let n = self.n();
        let m = self.n_coefs();
        let nw = working.len();
        // w = y - alpha D'1
        let w: Vec<f64> = self
            .y
            .iter()
            .zip(&self.driver_sum)
            .map(|(y, s)| y - self.alpha * s)
            .collect();

        let chol = BandedCholesky::factor(&self.gram(working))?;

        // Z = L^-1 (D_W Phi), z = L^-1 (D_W w)
        let mut z_cols: Vec<Vec<f64>> = (0..m)
            .map(|c| working.iter().map(|&k| self.d_phi_entry(c, k)).collect())
            .collect();
        for col in &mut z_cols {
            chol.forward(col);
        }
        let mut zw: Vec<f64> = working.iter().map(|&k| self.apply_d_row(k, &w)).collect();
        chol.forward(&mut zw);

        let phit_s = self.basis.apply_transpose(&self.driver_sum);
        let mut schur = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for a in 0..m {
            for b in a..m {
                let v: f64 = z_cols[a].iter().zip(&z_cols[b]).map(|(p, q)| p * q).sum();
                schur[(a, b)] = v;
                schur[(b, a)] = v;
            }
            schur[(a, a)] += self.penalty(a);
            rhs[a] = self.alpha * phit_s[a]
                + z_cols[a].iter().zip(&zw).map(|(p, q)| p * q).sum::<f64>();
        }
        let coefs = match schur.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                // Only reachable with a nearly empty working set, where the
                // drift and the phasic series are not jointly identified.
                let ridge = 1e-12 * schur.diagonal().amax().max(1.0);
                let mut reg = schur;
                for i in 0..m {
                    reg[(i, i)] += ridge;
                }
                reg.cholesky()
                    .ok_or(CvxEdaError::SolverDiverged {
                        iterations: 0,
                        residual: f64::INFINITY,
                    })?
                    .solve(&rhs)
            }
        };
        let coefs: Vec<f64> = coefs.iter().copied().collect();

        // v = G^-1 D_W (w - Phi u);  r = w - Phi u - D_W' v;  mu = -v
        let tonic = self.basis.apply(&coefs);
        let base: Vec<f64> = w.iter().zip(&tonic).map(|(a, b)| a - b).collect();
        let mut v: Vec<f64> = working.iter().map(|&k| self.apply_d_row(k, &base)).collect();
        chol.solve_in_place(&mut v);
        let mut r = base;
        self.scatter_dt(working.iter().copied().zip(v.iter().map(|x| -x)), &mut r);
        let mut mu = vec![0.0; nw];
        for (m_i, v_i) in mu.iter_mut().zip(&v) {
            *m_i = -v_i;
        }
        debug_assert_eq!(r.len(), n);
        Ok((r, coefs, mu))
    }

    /// Pentadiagonal `D_W D_W'` in banded storage.
    fn gram(&self, working: &[usize]) -> Vec<[f64; 3]> {
        let [c0, c1, c2] = self.stencil;
        let diag = c0 * c0 + c1 * c1 + c2 * c2;
        let off1 = c1 * c2 + c0 * c1;
        let off2 = c0 * c2;
        working
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut row = [0.0, 0.0, diag];
                for back in 1..=2 {
                    if i >= back {
                        row[2 - back] = match k - working[i - back] {
                            1 => off1,
                            2 => off2,
                            _ => 0.0,
                        };
                    }
                }
                row
            })
            .collect()
    }

    fn kkt(&self, r: &[f64], coefs: &[f64], working: &[usize], mu: &[f64]) -> KktResiduals {
        let tonic = self.basis.apply(coefs);
        let resid: Vec<f64> = r
            .iter()
            .zip(&tonic)
            .zip(self.y)
            .map(|((a, b), y)| a + b - y)
            .collect();
        let mut grad_r: Vec<f64> = resid
            .iter()
            .zip(&self.driver_sum)
            .map(|(e, s)| e + self.alpha * s)
            .collect();
        self.scatter_dt(working.iter().copied().zip(mu.iter().map(|m| -m)), &mut grad_r);
        let grad_u = self.basis.apply_transpose(&resid);
        let stat_u = grad_u
            .iter()
            .zip(coefs)
            .enumerate()
            .map(|(j, (g, c))| (g + self.penalty(j) * c).abs())
            .fold(0.0, f64::max);
        let stat_r = grad_r.iter().map(|g| g.abs()).fold(0.0, f64::max);

        let driver = self.apply_d(r);
        let mut full_mu = vec![0.0; driver.len()];
        for (&k, &m) in working.iter().zip(mu) {
            full_mu[k] = m;
        }
        KktResiduals {
            stationarity: stat_r.max(stat_u),
            primal_infeasibility: driver.iter().map(|p| (-p).max(0.0)).fold(0.0, f64::max),
            dual_infeasibility: full_mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max),
            complementarity: driver
                .iter()
                .zip(&full_mu)
                .map(|(p, m)| (p * m).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn solve(&self, max_iters: usize, tol: f64) -> Result<QpSolution, CvxEdaError> {
        let nc = self.n_constraints();
        let mut active = vec![true; nc];
        let mut working: Vec<usize> = (0..nc).collect();

        let (mut r, mut coefs, mut mu) = self.solve_equality(&working)?;
        let mut trace = vec![self.objective(&r, &coefs)];
        let mut iterations = 0;
        loop {
            if iterations >= max_iters {
                let kkt = self.kkt(&r, &coefs, &working, &mu);
                return Err(CvxEdaError::SolverDiverged {
                    iterations,
                    residual: kkt.max(),
                });
            }
            iterations += 1;

            // r, coefs solve the subproblem for `working`; check multipliers.
            let worst = working
                .iter()
                .zip(&mu)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(&k, &m)| (k, m));
            match worst {
                Some((k, m)) if m < -DROP_TOL => active[k] = false,
                _ => break,
            }
            working = (0..nc).filter(|&k| active[k]).collect();

            // Step towards the new subproblem minimizer, stopping at the first
            // driver sample that would turn negative.
            loop {
                let (r_new, c_new, mu_new) = self.solve_equality(&working)?;
                let dr: Vec<f64> = r_new.iter().zip(&r).map(|(a, b)| a - b).collect();
                let p = self.apply_d(&r);
                let dp = self.apply_d(&dr);
                let mut step = 1.0;
                let mut blocking = None;
                for k in (0..nc).filter(|&k| !active[k]) {
                    if dp[k] < 0.0 {
                        let t = (p[k].max(0.0)) / -dp[k];
                        if t < step {
                            step = t;
                            blocking = Some(k);
                        }
                    }
                }
                match blocking {
                    None => {
                        r = r_new;
                        coefs = c_new;
                        mu = mu_new;
                        trace.push(self.objective(&r, &coefs));
                        break;
                    }
                    Some(k) => {
                        for (a, d) in r.iter_mut().zip(&dr) {
                            *a += step * d;
                        }
                        for (a, b) in coefs.iter_mut().zip(&c_new) {
                            *a += step * (b - *a);
                        }
                        trace.push(self.objective(&r, &coefs));
                        active[k] = true;
                        working = (0..nc).filter(|&k| active[k]).collect();
                        iterations += 1;
                        if iterations >= max_iters {
                            break;
                        }
                    }
                }
            }
        }

        let kkt = self.kkt(&r, &coefs, &working, &mu);
        if kkt.max() > tol {
            return Err(CvxEdaError::SolverDiverged {
                iterations,
                residual: kkt.max(),
            });
        }
        let mut driver = vec![0.0; self.n()];
        let d = self.apply_d(&r);
        for k in 0..nc {
            driver[k + 1] = if active[k] { 0.0 } else { d[k] };
        }
        let mut multipliers = vec![0.0; self.n()];
        for (&k, &m) in working.iter().zip(&mu) {
            multipliers[k + 1] = m;
        }
        Ok(QpSolution {
            objective: self.objective(&r, &coefs),
            phasic: r,
            coefs,
            driver,
            multipliers,
            objective_trace: trace,
            iterations,
            kkt,
        })
    }
}

/// Cholesky factor of a symmetric positive-definite matrix with two
/// sub-diagonals. Row `i` stores `[L[i][i-2], L[i][i-1], L[i][i]]`.
struct BandedCholesky {
    rows: Vec<[f64; 3]>,
}

impl BandedCholesky {
    fn factor(a: &[[f64; 3]]) -> Result<Self, CvxEdaError> {
        let mut l = vec![[0.0; 3]; a.len()];
        for i in 0..a.len() {
            // L[i][i-2]
            if i >= 2 {
                l[i][0] = a[i][0] / l[i - 2][2];
            }
            // L[i][i-1]
            if i >= 1 {
                let mut s = a[i][1];
                if i >= 2 {
                    s -= l[i][0] * l[i - 1][1];
                }
                l[i][1] = s / l[i - 1][2];
            }
            let d = a[i][2] - l[i][0] * l[i][0] - l[i][1] * l[i][1];
            if !(d > 0.0) {
                return Err(CvxEdaError::SolverDiverged {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            l[i][2] = d.sqrt();
        }
        Ok(Self { rows: l })
    }

    /// `x <- L^-1 x`
    fn forward(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            let mut s = x[i];
            if i >= 1 {
                s -= self.rows[i][1] * x[i - 1];
            }
            if i >= 2 {
                s -= self.rows[i][0] * x[i - 2];
            }
            x[i] = s / self.rows[i][2];
        }
    }

    /// `x <- L^-T x`
    fn backward(&self, x: &mut [f64]) {
        let n = x.len();
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.rows[i + 1][1] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.rows[i + 2][0] * x[i + 2];
            }
            x[i] = s / self.rows[i][2];
        }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        self.forward(x);
        self.backward(x);
    }
}
