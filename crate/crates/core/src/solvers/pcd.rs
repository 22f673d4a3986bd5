use std::time::Instant;

use ndarray::{s, Array2};

use super::{
    objective_from_residual, relative_change, shrink_row, GroupLassoProblem, SolverObserver,
    SolverOptions, SolverResult, StepSchedule,
};
use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::parallel::{map_slice, Execution};

/// Parallel coordinate descent: all candidate rows are computed from the same
/// previous iterate, then blended in with step γₖ.
pub fn pcd_mmv(
    p: &GroupLassoProblem,
    opts: &SolverOptions,
    schedule: &StepSchedule,
) -> Result<SolverResult> {
    pcd_mmv_observed(p, opts, schedule, &mut ())
}

pub fn pcd_mmv_observed(
    p: &GroupLassoProblem,
    opts: &SolverOptions,
    schedule: &StepSchedule,
    observer: &mut dyn SolverObserver,
) -> Result<SolverResult> {
    schedule.validate()?;
    let start = Instant::now();
    let (n, m) = (p.n(), p.m());
    let mut x = ComplexMatrix::zeros(n, m);
    let mut r = p.residual(&x)?;
    let mut prev = objective_from_residual(p.lambda(), &r, &x);
    let mut history = Vec::with_capacity(opts.k_max);

    for k in 1..=opts.k_max {
        let candidate = candidates(p, &x, &r, opts.execution);
        let gamma = schedule.gamma(k);
        let keep = 1.0 - gamma;
        let re = candidate.re() * gamma + &(x.re() * keep);
        let im = candidate.im() * gamma + &(x.im() * keep);
        x = ComplexMatrix::new(re, im)?;
        r = p.residual(&x)?;
        let obj = objective_from_residual(p.lambda(), &r, &x);
        if !obj.is_finite() {
            return Err(Error::Numeric {
                stage: "pcd_mmv",
                iteration: k,
            });
        }
        history.push(obj);
        observer.iteration(k, &x);
        if relative_change(prev, obj) < opts.stop_tol {
            break;
        }
        prev = obj;
    }

    Ok(SolverResult {
        x_hat: x,
        iterations_run: history.len(),
        objective_history: history,
        wall_time_s: start.elapsed().as_secs_f64(),
        diverged: false,
    })
}

/// Candidate rows X̃ for every row, given the iterate and its residual `AX − Y`.
fn candidates(p: &GroupLassoProblem, x: &ComplexMatrix, r: &ComplexMatrix, exec: Execution) -> ComplexMatrix {
    let c = p.column_norms_sq();
    let lambda = p.lambda();
    let (n, m) = x.dim();
    let blocks = row_blocks(n, exec);
    let parts = map_slice(exec, &blocks, |&(lo, hi)| {
        // W = diag(c) X − Aᴴ(AX − Y), restricted to this block of rows.
        let (ar, ai) = (p.a().re().slice(s![.., lo..hi]), p.a().im().slice(s![.., lo..hi]));
        let g_re = ar.t().dot(r.re()) + ai.t().dot(r.im());
        let g_im = ar.t().dot(r.im()) - ai.t().dot(r.re());
        let mut out_re = Array2::zeros((hi - lo, m));
        let mut out_im = Array2::zeros((hi - lo, m));
        for (j, i) in (lo..hi).enumerate() {
            let w_re = &x.re().row(i) * c[i] - g_re.row(j);
            let w_im = &x.im().row(i) * c[i] - g_im.row(j);
            let (tr, ti) = shrink_row(w_re.view(), w_im.view(), c[i], lambda);
            out_re.row_mut(j).assign(&tr);
            out_im.row_mut(j).assign(&ti);
        }
        (out_re, out_im)
    });
    let mut out = ComplexMatrix::zeros(n, m);
    for (&(lo, hi), (pr, pi)) in blocks.iter().zip(parts) {
        out.re_mut().slice_mut(s![lo..hi, ..]).assign(&pr);
        out.im_mut().slice_mut(s![lo..hi, ..]).assign(&pi);
    }
    out
}

fn row_blocks(n: usize, exec: Execution) -> Vec<(usize, usize)> {
    if !exec.is_parallel() {
        return vec![(0, n)];
    }
    const BLOCK: usize = 64;
    (0..n.div_ceil(BLOCK)).map(|b| (b * BLOCK, ((b + 1) * BLOCK).min(n))).collect()
}
