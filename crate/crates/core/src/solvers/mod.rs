//! GROUP LASSO for the MMV model,
//!
//! ```text
//! min_X  ½‖AX − Y‖²_F + λ Σᵢ ‖X_{i,:}‖₂
//! ```
//!
//! solved by sequential block-coordinate descent ([`bcd_mmv`]) or parallel
//! coordinate descent with a diminishing step ([`pcd_mmv`]), plus a simplified
//! MMV-AMP baseline ([`amp_mmv_baseline`]).

mod amp;
mod bcd;
mod pcd;
mod schedule;

pub use amp::{amp_mmv_baseline, AmpOptions};
pub use bcd::{bcd_mmv, bcd_mmv_observed};
pub use pcd::{pcd_mmv, pcd_mmv_observed};
pub use schedule::{StepForm, StepSchedule};

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::parallel::Execution;

#[derive(Debug, Clone)]
pub struct GroupLassoProblem {
    a: ComplexMatrix,
    y: ComplexMatrix,
    lambda: f64,
    col_norm_sq: Array1<f64>,
}

impl GroupLassoProblem {
    pub fn new(a: ComplexMatrix, y: ComplexMatrix, lambda: f64) -> Result<Self> {
        if a.rows() != y.rows() {
            return Err(Error::shape("GroupLassoProblem", a.dim(), y.dim()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config("lambda", format!("{lambda} must be finite and >= 0")));
        }
        let col_norm_sq = a.column_norms_sq();
        if let Some(i) = col_norm_sq.iter().position(|&c| c <= 0.0) {
            return Err(Error::config("A", format!("column {i} has zero norm")));
        }
        Ok(Self {
            a,
            y,
            lambda,
            col_norm_sq,
        })
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn y(&self) -> &ComplexMatrix {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.y.clone(), lambda)
    }

    /// N, the number of rows of X.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// M, the number of measurement vectors.
    pub fn m(&self) -> usize {
        self.y.cols()
    }

    pub fn column_norms_sq(&self) -> &Array1<f64> {
        &self.col_norm_sq
    }

    /// `AX − Y`.
    pub fn residual(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.a.matmul(x)?.sub(&self.y)
    }

    pub fn kkt_threshold(&self) -> f64 {
        kkt_threshold(&self.a, &self.y)
    }
}

/// `maxᵢ ‖A_{:,i}ᴴ Y‖₂`: the smallest λ for which X = 0 is optimal.
pub fn kkt_threshold(a: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    let g = a.hermitian_matmul(y).expect("A and Y share a row count");
    g.row_norms().iter().fold(0.0, |m, &v| m.max(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub k_max: usize,
    /// Stop when the relative change of the objective falls below this.
    pub stop_tol: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k_max: 200,
            stop_tol: 1e-8,
            execution: Execution::Sequential,
        }
    }
}

impl SolverOptions {
    pub fn fixed_iterations(k_max: usize) -> Self {
        Self {
            k_max,
            stop_tol: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_hat: ComplexMatrix,
    /// Objective after each iteration.
    pub objective_history: Vec<f64>,
    pub iterations_run: usize,
    pub wall_time_s: f64,
    /// Only set by the AMP baseline.
    pub diverged: bool,
}

/// Serialized summary of one solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub struct SolverReport {
    pub alg: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub lambda: f64,
    pub k_max: usize,
    pub schedule: Option<StepSchedule>,
    pub objective_history: Vec<f64>,
    pub mse: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Hooks invoked while a solver runs. Both default to no-ops.
pub trait SolverObserver {
    /// After iteration `k` (1-based) completes.
    fn iteration(&mut self, _k: usize, _x: &ComplexMatrix) {}
    /// After row `i` is rewritten during sweep `k` (sequential solvers only).
    fn row_updated(&mut self, _k: usize, _i: usize, _x: &ComplexMatrix) {}
}

impl SolverObserver for () {}

impl<F: FnMut(usize, &ComplexMatrix)> SolverObserver for F {
    fn iteration(&mut self, k: usize, x: &ComplexMatrix) {
        self(k, x)
    }
}

/// Scalar threshold `f(x, η)`: shrinks `x` toward zero by `λη`.
pub fn soft_threshold(x: f64, eta: f64, lambda: f64) -> f64 {
    let t = lambda * eta;
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `(1/2)‖AX − Y‖²_F + λ Σᵢ ‖X_{i,:}‖₂`.
pub fn group_lasso_objective(p: &GroupLassoProblem, x: &ComplexMatrix) -> Result<f64> {
    if x.dim() != (p.n(), p.m()) {
        return Err(Error::shape("group_lasso_objective", (p.n(), p.m()), x.dim()));
    }
    let r = p.residual(x)?;
    Ok(objective_from_residual(p.lambda, &r, x))
}

pub(crate) fn objective_from_residual(lambda: f64, r: &ComplexMatrix, x: &ComplexMatrix) -> f64 {
    0.5 * r.frobenius_norm_sq() + lambda * x.row_norms().sum()
}

/// Exact minimizer of the objective over row `i` with every other row of `x`
/// held fixed.
pub fn row_update(
    p: &GroupLassoProblem,
    x: &ComplexMatrix,
    i: usize,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if x.dim() != (p.n(), p.m()) {
        return Err(Error::shape("row_update", (p.n(), p.m()), x.dim()));
    }
    if i >= p.n() {
        return Err(Error::config("row", format!("{i} out of range for N = {}", p.n())));
    }
    let r = p.residual(x)?;
    let g = column_hermitian_times(&p.a, i, &r);
    let (xr, xi) = x.row(i);
    let c = p.col_norm_sq[i];
    let w_re = &xr * c - &g.0;
    let w_im = &xi * c - &g.1;
    Ok(shrink_row(w_re.view(), w_im.view(), c, p.lambda))
}

/// `A_{:,i}ᴴ R` as an M-vector `(re, im)`.
pub(crate) fn column_hermitian_times(
    a: &ComplexMatrix,
    i: usize,
    r: &ComplexMatrix,
) -> (Array1<f64>, Array1<f64>) {
    let ar = a.re().column(i);
    let ai = a.im().column(i);
    let re = ar.dot(r.re()) + ai.dot(r.im());
    let im = ar.dot(r.im()) - ai.dot(r.re());
    (re, im)
}

/// `(w/‖w‖)·f(‖w‖/c, 1/c)`, with the zero row whenever `‖w‖ ≤ λ`.
pub(crate) fn shrink_row(
    w_re: ArrayView1<f64>,
    w_im: ArrayView1<f64>,
    c: f64,
    lambda: f64,
) -> (Array1<f64>, Array1<f64>) {
    let norm = (w_re.dot(&w_re) + w_im.dot(&w_im)).sqrt();
    let mag = soft_threshold(norm / c, 1.0 / c, lambda);
    if norm == 0.0 || mag == 0.0 {
        return (Array1::zeros(w_re.len()), Array1::zeros(w_im.len()));
    }
    let f = mag / norm;
    (w_re.mapv(|v| v * f), w_im.mapv(|v| v * f))
}

pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    let denom = prev.abs().max(f64::MIN_POSITIVE);
    (prev - cur).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::signal::gen_measurement_matrix;
    use ndarray::array;

    fn random_problem(seed: u64, l: usize, n: usize, m: usize, lambda: f64) -> (GroupLassoProblem, ComplexMatrix) {
        let a = gen_measurement_matrix(l, n, RngStream::new(seed, 0), false);
        let y = gen_measurement_matrix(l, m, RngStream::new(seed, 1), false);
        let x = gen_measurement_matrix(n, m, RngStream::new(seed, 2), false);
        (GroupLassoProblem::new(a, y, lambda).unwrap(), x)
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 1.0, 2.0), 3.0);
        assert_eq!(soft_threshold(1.0, 1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-5.0, 1.0, 2.0), -3.0);
        assert_eq!(soft_threshold(2.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn objective_closed_forms() {
        let (p, _) = random_problem(1, 4, 6, 2, 0.3);
        let zero = ComplexMatrix::zeros(6, 2);
        let v = group_lasso_objective(&p, &zero).unwrap();
        assert!((v - 0.5 * p.y().frobenius_norm_sq()).abs() < 1e-12);

        let p = GroupLassoProblem::new(ComplexMatrix::identity(3), ComplexMatrix::zeros(3, 2), 0.7).unwrap();
        let mut x = ComplexMatrix::zeros(3, 2);
        x.set(1, 0, (3.0, 0.0));
        x.set(1, 1, (0.0, 4.0));
        let v = group_lasso_objective(&p, &x).unwrap();
        assert!((v - (0.5 * 25.0 + 0.7 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_scalar_loop() {
        let (p, x) = random_problem(3, 5, 7, 3, 0.4);
        let (l, n, m) = (5, 7, 3);
        let mut fit = 0.0;
        for r in 0..l {
            for c in 0..m {
                let (mut sr, mut si) = (0.0, 0.0);
                for k in 0..n {
                    let (ar, ai) = p.a().get(r, k);
                    let (xr, xi) = x.get(k, c);
                    sr += ar * xr - ai * xi;
                    si += ar * xi + ai * xr;
                }
                let (yr, yi) = p.y().get(r, c);
                fit += (sr - yr).powi(2) + (si - yi).powi(2);
            }
        }
        let mut pen = 0.0;
        for k in 0..n {
            let mut s = 0.0;
            for c in 0..m {
                let (xr, xi) = x.get(k, c);
                s += xr * xr + xi * xi;
            }
            pen += s.sqrt();
        }
        let expected = 0.5 * fit + 0.4 * pen;
        let got = group_lasso_objective(&p, &x).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs());
    }

    #[test]
    fn row_update_trivial_cases() {
        let (p, _) = random_problem(5, 4, 6, 2, 0.1);
        let p0 = GroupLassoProblem::new(p.a().clone(), ComplexMatrix::zeros(4, 2), 0.1).unwrap();
        let (re, im) = row_update(&p0, &ComplexMatrix::zeros(6, 2), 3).unwrap();
        assert!(re.iter().chain(im.iter()).all(|&v| v == 0.0));

        let mut y = ComplexMatrix::zeros(3, 1);
        y.set(1, 0, (2.0, 0.0));
        let p = GroupLassoProblem::new(ComplexMatrix::identity(3), y, 0.5).unwrap();
        let (re, im) = row_update(&p, &ComplexMatrix::zeros(3, 1), 1).unwrap();
        assert_eq!(re, array![1.5]);
        assert_eq!(im, array![0.0]);
    }

    /// Numerical minimum of the one-row restriction: backtracking descent on
    /// the 2M real coordinates with central-difference gradients, compared
    /// against the zero row (the nonsmooth candidate).
    fn numeric_row_minimum(p: &GroupLassoProblem, x: &ComplexMatrix, i: usize) -> f64 {
        let m = p.m();
        let eval = |v: &[f64]| {
            let mut xx = x.clone();
            for c in 0..m {
                xx.set(i, c, (v[2 * c], v[2 * c + 1]));
            }
            group_lasso_objective(p, &xx).unwrap()
        };
        let mut best = f64::INFINITY;
        best = best.min(eval(&vec![0.0; 2 * m]));
        let mut v: Vec<f64> = (0..m).flat_map(|c| { let (a, b) = x.get(i, c); [a, b] }).collect();
        let mut step = 0.1;
        let h = 1e-7;
        for _ in 0..20_000 {
            let f0 = eval(&v);
            let grad: Vec<f64> = (0..2 * m)
                .map(|k| {
                    let mut vp = v.clone();
                    vp[k] += h;
                    let mut vm = v.clone();
                    vm[k] -= h;
                    (eval(&vp) - eval(&vm)) / (2.0 * h)
                })
                .collect();
            loop {
                let cand: Vec<f64> = v.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let f1 = eval(&cand);
                if f1 < f0 {
                    v = cand;
                    step *= 1.2;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if step < 1e-16 {
                break;
            }
        }
        best.min(eval(&v))
    }

    #[test]
    fn row_update_minimizes_one_row_restriction() {
        for seed in 0..4 {
            let (p, x) = random_problem(10 + seed, 4, 6, 2, 0.8);
            for i in [0, 3, 5] {
                let (re, im) = row_update(&p, &x, i).unwrap();
                let mut xu = x.clone();
                xu.set_row(i, re.view(), im.view());
                let got = group_lasso_objective(&p, &xu).unwrap();
                let numeric = numeric_row_minimum(&p, &x, i);
                assert!(got <= numeric + 1e-8, "seed {seed} row {i}: {got} vs {numeric}");
            }
        }
    }

    #[test]
    fn problem_validation() {
        let a = ComplexMatrix::identity(3);
        assert!(GroupLassoProblem::new(a.clone(), ComplexMatrix::zeros(2, 1), 0.1).is_err());
        assert!(GroupLassoProblem::new(a.clone(), ComplexMatrix::zeros(3, 1), -1.0).is_err());
        let mut z = a.clone();
        z.set(0, 0, (0.0, 0.0));
        assert!(GroupLassoProblem::new(z, ComplexMatrix::zeros(3, 1), 0.1).is_err());
    }
}
