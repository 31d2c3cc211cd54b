//! cvxEDA against a dense interior-point solve of the same program, built
//! from the analytic Bateman function rather than the solver's recursion.

use dermalab::cvxeda::{decompose, tonic_basis, CvxEdaParams};
use nalgebra::{DMatrix, DVector};

fn bateman(t: f64, tau0: f64, tau1: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-t / tau0).exp() - (-t / tau1).exp()
    }
}

struct Dense {
    /// Driver columns (drivers at samples 1..n-1) followed by the two free
    /// initial-state exponentials.
    g: DMatrix<f64>,
    /// Tonic basis columns.
    b: DMatrix<f64>,
    n_splines: usize,
}

fn assemble(n: usize, fs: f64, p: &CvxEdaParams) -> Dense {
    let dt = 1.0 / fs;
    let nd = n - 2;
    let mut g = DMatrix::zeros(n, nd + 2);
    for j in 1..=nd {
        for i in j + 1..n {
            g[(i, j - 1)] = dt * bateman((i - j) as f64 * dt, p.tau0, p.tau1);
        }
    }
    for i in 0..n {
        g[(i, nd)] = (-(i as f64) * dt / p.tau0).exp();
        g[(i, nd + 1)] = (-(i as f64) * dt / p.tau1).exp();
    }
    let basis = tonic_basis(n, fs, p.knot_spacing);
    let rows = basis.to_dense();
    let b = DMatrix::from_fn(n, basis.n_columns(), |i, j| rows[i][j]);
    Dense {
        g,
        b,
        n_splines: basis.n_splines(),
    }
}

/// Minimizes 1/2 x'Hx + f'x subject to x[k] >= 0 for k < n_pos by a
/// primal-dual interior-point iteration.
fn interior_point(h: &DMatrix<f64>, f: &DVector<f64>, n_pos: usize) -> DVector<f64> {
    let m = f.len();
    let mut x = DVector::from_fn(m, |k, _| if k < n_pos { 1.0 } else { 0.0 });
    let mut s = DVector::from_element(n_pos, 1.0);
    for _ in 0..200 {
        let mu = (0..n_pos).map(|k| x[k] * s[k]).sum::<f64>() / n_pos as f64;
        let mut rd = h * &x + f;
        for k in 0..n_pos {
            rd[k] -= s[k];
        }
        if rd.amax() < 1e-13 && mu < 1e-14 {
            break;
        }
        let sigma = 0.1;
        let mut lhs = h.clone();
        let mut rhs = -rd.clone();
        for k in 0..n_pos {
            lhs[(k, k)] += s[k] / x[k];
            rhs[k] -= (x[k] * s[k] - sigma * mu) / x[k];
        }
        let dx = lhs.lu().solve(&rhs).expect("nonsingular Newton system");
        let ds = DVector::from_fn(n_pos, |k, _| (sigma * mu - x[k] * s[k] - s[k] * dx[k]) / x[k]);
        let mut step: f64 = 1.0;
        for k in 0..n_pos {
            if dx[k] < 0.0 {
                step = step.min(-0.99 * x[k] / dx[k]);
            }
            if ds[k] < 0.0 {
                step = step.min(-0.99 * s[k] / ds[k]);
            }
        }
        x += step * dx;
        s += step * ds;
    }
    x
}

struct Reference {
    objective: f64,
    phasic: Vec<f64>,
    tonic: Vec<f64>,
    driver: Vec<f64>,
}

fn reference(y: &[f64], fs: f64, p: &CvxEdaParams) -> Reference {
    let n = y.len();
    let d = assemble(n, fs, p);
    let nd = n - 2;
    let a = DMatrix::from_fn(n, d.g.ncols() + d.b.ncols(), |i, j| {
        if j < d.g.ncols() {
            d.g[(i, j)]
        } else {
            d.b[(i, j - d.g.ncols())]
        }
    });
    let yv = DVector::from_column_slice(y);
    let mut h = a.transpose() * &a;
    let mut f = -(a.transpose() * &yv);
    for k in 0..nd {
        f[k] += p.alpha;
    }
    for j in 0..d.n_splines {
        let k = d.g.ncols() + j;
        h[(k, k)] += p.gamma;
    }
    let x = interior_point(&h, &f, nd);
    let objective = 0.5 * x.dot(&(&h * &x)) + f.dot(&x) + 0.5 * yv.dot(&yv);
    let phasic = &d.g * x.rows(0, d.g.ncols());
    let tonic = &d.b * x.rows(d.g.ncols(), d.b.ncols());
    Reference {
        objective,
        phasic: phasic.iter().copied().collect(),
        tonic: tonic.iter().copied().collect(),
        driver: x.rows(0, nd).iter().copied().collect(),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pulses(n: usize, fs: f64, base: f64, at: &[(f64, f64)]) -> Vec<f64> {
    let peak = (0..2000)
        .map(|k| bateman(k as f64 * 0.01, 2.0, 0.7))
        .fold(0.0, f64::max);
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            base + 0.01 * t + at.iter().map(|(t0, a)| a * bateman(t - t0, 2.0, 0.7) / peak).sum::<f64>()
        })
        .collect()
}

#[test]
fn matches_dense_reference_on_pulses() {
    let fs = 10.0;
    let p = CvxEdaParams::default();
    let y = pulses(200, fs, 1.0, &[(4.0, 0.8), (11.5, 0.4)]);
    let got = decompose(&y, fs, &p).unwrap();
    let want = reference(&y, fs, &p);

    let rel = (got.objective_value - want.objective).abs() / want.objective.abs().max(1e-12);
    assert!(rel < 1e-7, "objective {} vs {}", got.objective_value, want.objective);
    assert!(max_abs_diff(&got.phasic, &want.phasic) < 1e-4);
    assert!(max_abs_diff(&got.tonic, &want.tonic) < 1e-4);
    // reference column k is driver sample k + 1; the end samples carry no constraint
    assert_eq!(got.driver.len(), want.driver.len() + 2);
    let peak = want.driver.iter().copied().fold(0.0, f64::max);
    assert!(max_abs_diff(&got.driver[1..got.driver.len() - 1], &want.driver) < 1e-2 * peak);
}

#[test]
fn constant_input_has_no_driver() {
    let fs = 10.0;
    let p = CvxEdaParams::default();
    let y = vec![0.5; 600];
    let got = decompose(&y, fs, &p).unwrap();
    let want = reference(&y, fs, &p);
    assert!(want.driver.iter().all(|d| d.abs() <= 1e-3));
    assert!(got.driver.iter().all(|d| d.abs() <= 1e-3));
    assert!(got.tonic.iter().all(|t| (t - 0.5).abs() < 1e-2));
    // a constant is fitted exactly by the tonic part, so the optimum is zero
    assert!(want.objective.abs() < 1e-9);
    assert!(got.objective_value.abs() < 1e-9);
    assert!(got.objective_value <= want.objective + 1e-12);
}

#[test]
fn noisy_trace_objective_agrees() {
    let fs = 10.0;
    let p = CvxEdaParams::default();
    let mut y = pulses(250, fs, 2.0, &[(3.0, 0.5), (9.0, 0.9), (17.0, 0.3)]);
    // deterministic pseudo-noise
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for v in &mut y {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        *v += 0.01 * ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
    }
    let got = decompose(&y, fs, &p).unwrap();
    let want = reference(&y, fs, &p);
    let rel = (got.objective_value - want.objective).abs() / want.objective.abs();
    assert!(rel < 1e-7, "objective {} vs {}", got.objective_value, want.objective);
    assert!(got.objective_value <= want.objective * (1.0 + 1e-9));
}
