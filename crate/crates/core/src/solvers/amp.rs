//! Simplified MMV-AMP baseline.
//!
//! Residual iteration with an Onsager correction and a row-wise group
//! soft-threshold denoiser whose threshold tracks the empirical residual
//! power. This is a cheap stand-in for an MMSE-denoiser AMP with state
//! evolution; it only fills the AMP slot in the experiment tables.

use std::time::Instant;

use ndarray::Array1;

use super::SolverResult;
use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpOptions {
    pub k_max: usize,
    /// Threshold multiplier τ; the row threshold is `τ·σ̂·√M`. When `None`,
    /// derived from the access probability.
    pub tau: Option<f64>,
    /// Stop when the relative change of the estimate falls below this.
    pub stop_tol: f64,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            k_max: 200,
            tau: None,
            stop_tol: 1e-10,
        }
    }
}

/// Default τ for an access probability `p`: sparser scenes get a higher
/// threshold.
pub fn default_tau(access_prob: f64) -> f64 {
    let p = access_prob.clamp(1e-3, 0.5);
    (2.0 * (1.0 / p).ln()).sqrt().max(1.0) * 0.75
}

pub fn amp_mmv_baseline(
    a: &ComplexMatrix,
    y: &ComplexMatrix,
    access_prob: f64,
    opts: &AmpOptions,
) -> Result<SolverResult> {
    if a.rows() != y.rows() {
        return Err(Error::shape("amp_mmv_baseline", a.dim(), y.dim()));
    }
    let start = Instant::now();
    let (l, n, m) = (a.rows(), a.cols(), y.cols());
    let tau = opts.tau.unwrap_or_else(|| default_tau(access_prob));

    // Work with unit-norm columns: A = Ã·diag(s), and recover s∘X at the end.
    let norms: Array1<f64> = a.column_norms_sq().mapv(f64::sqrt);
    if norms.iter().any(|&v| v <= 0.0) {
        return Err(Error::config("A", "zero column"));
    }
    let mut at = a.clone();
    for (c, &s) in norms.iter().enumerate() {
        at.re_mut().column_mut(c).mapv_inplace(|v| v / s);
        at.im_mut().column_mut(c).mapv_inplace(|v| v / s);
    }

    let y_power = y.frobenius_norm_sq();
    let mut x = ComplexMatrix::zeros(n, m);
    let mut r = y.clone();
    let mut history = Vec::new();
    let mut diverged = false;
    let ratio = n as f64 / l as f64;

    for _ in 0..opts.k_max {
        let sigma = (r.frobenius_norm_sq() / (l * m) as f64).sqrt();
        if sigma == 0.0 {
            break;
        }
        let theta = tau * sigma * (m as f64).sqrt();
        let u = x.add(&at.hermitian_matmul(&r)?)?;
        let mut next = ComplexMatrix::zeros(n, m);
        let mut divergence = 0.0;
        for i in 0..n {
            let norm = u.row_norm_sq(i).sqrt();
            if norm > theta {
                let f = 1.0 - theta / norm;
                let (ur, ui) = u.row(i);
                next.set_row(i, (&ur * f).view(), (&ui * f).view());
                // Per-coordinate divergence of the complex group shrinkage.
                divergence += f + theta / (2.0 * m as f64 * norm);
            }
        }
        let onsager = ratio * divergence / n as f64;
        let r_next = y.sub(&at.matmul(&next)?)?.add(&r.scale(onsager))?;
        let power = r_next.frobenius_norm_sq();
        if !power.is_finite() || power > 10.0 * y_power.max(f64::MIN_POSITIVE) {
            diverged = true;
            break;
        }
        let change = next.sub(&x)?.frobenius_norm_sq().sqrt();
        let scale = next.frobenius_norm_sq().sqrt().max(f64::MIN_POSITIVE);
        x = next;
        r = r_next;
        history.push(0.5 * power);
        if change / scale < opts.stop_tol {
            break;
        }
    }

    for (c, &s) in norms.iter().enumerate() {
        x.re_mut().row_mut(c).mapv_inplace(|v| v / s);
        x.im_mut().row_mut(c).mapv_inplace(|v| v / s);
    }
    Ok(SolverResult {
        x_hat: x,
        iterations_run: history.len(),
        objective_history: history,
        wall_time_s: start.elapsed().as_secs_f64(),
        diverged,
    })
}
