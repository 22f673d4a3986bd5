use super::{backward, GradientSet};
use crate::complex::ComplexMatrix;
use crate::error::Result;
use crate::net::{forward_batch, ForwardTrace, NetworkParams};

/// Distance of the evaluated point from the nearest non-smooth point: the
/// smallest `|‖w‖ − λ|` over all layers, rows and samples, and the smallest
/// `|z|` over all hidden pre-activations.
pub fn kink_margin(params: &NetworkParams, trace: &ForwardTrace) -> f64 {
    let lambda = params.arch.lambda;
    let thresh = trace
        .layers
        .iter()
        .flat_map(|l| l.w_norm.iter())
        .map(|&n| (n - lambda).abs());
    let relu = trace
        .real_branch
        .pre
        .iter()
        .chain(&trace.imag_branch.pre)
        .flat_map(|z| z.iter())
        .map(|z| z.abs());
    thresh.chain(relu).fold(f64::INFINITY, f64::min)
}

fn loss_at(params: &NetworkParams, x: &ComplexMatrix, noise: &ComplexMatrix) -> Result<f64> {
    let trace = forward_batch(params, x, noise)?;
    let denom = (params.arch.n * trace.batch) as f64;
    Ok(trace.x_hat.sub(x)?.frobenius_norm_sq() / denom)
}

/// Central differences of the loss for every parameter, in flat order.
pub fn finite_difference_gradient(
    params: &NetworkParams,
    x: &ComplexMatrix,
    noise: &ComplexMatrix,
    step: f64,
) -> Result<Vec<f64>> {
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut theta = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for j in 0..base.len() {
        theta[j] = base[j] + step;
        probe.set_flat(&theta);
        let up = loss_at(&probe, x, noise)?;
        theta[j] = base[j] - step;
        probe.set_flat(&theta);
        let down = loss_at(&probe, x, noise)?;
        theta[j] = base[j];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − fd| / max(|analytic|, |fd|, floor)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub kink_margin: f64,
    pub analytic: GradientSet,
}

/// Compares [`backward`] against central differences at one point.
pub fn gradient_check(
    params: &NetworkParams,
    x: &ComplexMatrix,
    noise: &ComplexMatrix,
    step: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let trace = forward_batch(params, x, noise)?;
    let analytic = backward(params, x, &trace)?;
    let fd = finite_difference_gradient(params, x, noise, step)?;
    let mut worst = (0.0, 0);
    for (j, (a, f)) in analytic.to_flat().iter().zip(&fd).enumerate() {
        let rel = (a - f).abs() / a.abs().max(f.abs()).max(floor);
        if rel > worst.0 {
            worst = (rel, j);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        checked: fd.len(),
        kink_margin: kink_margin(params, &trace),
        analytic,
    })
}
