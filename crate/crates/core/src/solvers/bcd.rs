use std::time::Instant;

use super::{
    objective_from_residual, relative_change, shrink_row, GroupLassoProblem,
    SolverObserver, SolverOptions, SolverResult,
};
use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};

/// Block-coordinate descent: each sweep rewrites rows `0..N` one after
/// another, every update seeing the rows already rewritten in that sweep.
pub fn bcd_mmv(p: &GroupLassoProblem, opts: &SolverOptions) -> Result<SolverResult> {
    bcd_mmv_observed(p, opts, &mut ())
}

pub fn bcd_mmv_observed(
    p: &GroupLassoProblem,
    opts: &SolverOptions,
    observer: &mut dyn SolverObserver,
) -> Result<SolverResult> {
    let start = Instant::now();
    let (n, m) = (p.n(), p.m());
    let l = p.a().rows();
    let c = p.column_norms_sq();
    let lambda = p.lambda();
    // Columns of A laid out contiguously.
    let at_re = p.a().re().t().as_standard_layout().into_owned();
    let at_im = p.a().im().t().as_standard_layout().into_owned();
    let (at_re, at_im) = (at_re.as_slice().unwrap(), at_im.as_slice().unwrap());

    let mut x = ComplexMatrix::zeros(n, m);
    let mut prev = objective_from_residual(lambda, p.y(), &x);
    let mut history = Vec::with_capacity(opts.k_max);
    let mut w_re = vec![0.0; m];
    let mut w_im = vec![0.0; m];

    // AX − Y, recomputed exactly after every sweep and kept current within a
    // sweep by rank-one corrections.
    let mut r = p.residual(&x)?;
    for k in 1..=opts.k_max {
        let (mut r_re, mut r_im) = r.into_parts();
        let r_re = r_re.as_slice_mut().unwrap();
        let r_im = r_im.as_slice_mut().unwrap();
        for i in 0..n {
            let col_re = &at_re[i * l..(i + 1) * l];
            let col_im = &at_im[i * l..(i + 1) * l];
            // w = c_i·x_i − A_{:,i}ᴴ R
            for j in 0..m {
                let (xr, xi) = x.get(i, j);
                w_re[j] = c[i] * xr;
                w_im[j] = c[i] * xi;
            }
            for row in 0..l {
                let (ar, ai) = (col_re[row], col_im[row]);
                let rr = &r_re[row * m..(row + 1) * m];
                let ri = &r_im[row * m..(row + 1) * m];
                for j in 0..m {
                    w_re[j] -= ar * rr[j] + ai * ri[j];
                    w_im[j] -= ar * ri[j] - ai * rr[j];
                }
            }
            let (nr, ni) = shrink_row(
                ndarray::ArrayView1::from(&w_re[..]),
                ndarray::ArrayView1::from(&w_im[..]),
                c[i],
                lambda,
            );
            let mut changed = false;
            for j in 0..m {
                let (xr, xi) = x.get(i, j);
                let (dr, di) = (nr[j] - xr, ni[j] - xi);
                if dr != 0.0 || di != 0.0 {
                    changed = true;
                    // R += A_{:,i} · Δx_{i,j}
                    for row in 0..l {
                        let (ar, ai) = (col_re[row], col_im[row]);
                        r_re[row * m + j] += ar * dr - ai * di;
                        r_im[row * m + j] += ar * di + ai * dr;
                    }
                }
            }
            if changed {
                x.set_row(i, nr.view(), ni.view());
            }
            observer.row_updated(k, i, &x);
        }
        r = p.residual(&x)?;
        let obj = objective_from_residual(lambda, &r, &x);
        if !obj.is_finite() {
            return Err(Error::Numeric {
                stage: "bcd_mmv",
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
