use ndarray::{s, Array1, Array2, Axis};

use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::net::{stack_rows, unstack_rows, BranchTrace, DenseLayer, ForwardTrace, NetworkParams};

/// Gradients with the same layout as [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    /// `∂E/∂Re(A) + i·∂E/∂Im(A)`.
    pub a: ComplexMatrix,
    pub real_branch: Vec<DenseLayer>,
    pub imag_branch: Vec<DenseLayer>,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let zeros = |b: &[DenseLayer]| {
            b.iter()
                .map(|l| DenseLayer::zeros(l.fan_in(), l.fan_out()))
                .collect()
        };
        Self {
            a: ComplexMatrix::zeros(params.a.rows(), params.a.cols()),
            real_branch: zeros(&params.real_branch),
            imag_branch: zeros(&params.imag_branch),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        *self.a.re_mut() += other.a.re();
        *self.a.im_mut() += other.a.im();
        let mine = self.real_branch.iter_mut().chain(self.imag_branch.iter_mut());
        for (l, o) in mine.zip(other.real_branch.iter().chain(&other.imag_branch)) {
            l.weight += &o.weight;
            l.bias += &o.bias;
        }
    }

    /// Values in the order of [`NetworkParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.a.re().iter().chain(self.a.im().iter()).copied().collect();
        for layer in self.real_branch.iter().chain(&self.imag_branch) {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.to_flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradient of `Σ‖X̂ − X‖²_F / denom` over the batch held in `trace`.
pub(crate) fn backward_scaled(
    params: &NetworkParams,
    x_true: &ComplexMatrix,
    trace: &ForwardTrace,
    denom: f64,
) -> Result<GradientSet> {
    let arch = &params.arch;
    if trace.states.len() != arch.u + 1 || trace.layers.len() != arch.u {
        return Err(Error::MissingTrace("unrolled layer intermediates"));
    }
    if arch.v > 0 && (trace.real_branch.inputs.len() != arch.v || trace.imag_branch.inputs.len() != arch.v) {
        return Err(Error::MissingTrace("correction layer intermediates"));
    }
    if x_true.dim() != trace.x_hat.dim() || trace.x_in.dim() != x_true.dim() {
        return Err(Error::shape("backward", x_true.dim(), trace.x_hat.dim()));
    }
    let (n, m) = (arch.n, arch.m);
    let mut grads = GradientSet::zeros_like(params);

    let scale = 2.0 / denom;
    let d_re = (trace.x_hat.re() - x_true.re()) * scale;
    let d_im = (trace.x_hat.im() - x_true.im()) * scale;

    // Correction part.
    let (mut dx_re, mut dx_im) = if arch.v == 0 {
        (d_re, d_im)
    } else {
        let (gr, fr) = branch_backward(&params.real_branch, &trace.real_branch, stack_rows(&d_re, m));
        let (gi, fi) = branch_backward(&params.imag_branch, &trace.imag_branch, stack_rows(&d_im, m));
        grads.real_branch = gr;
        grads.imag_branch = gi;
        let df = fr + fi;
        (
            unstack_rows(&df.slice(s![.., ..m]).to_owned(), n, m),
            unstack_rows(&df.slice(s![.., m..]).to_owned(), n, m),
        )
    };

    // Approximation part, last layer first.
    let (ar, ai) = (params.a.re(), params.a.im());
    let c = &trace.col_norm_sq;
    let lambda = arch.lambda;
    let (l, cols) = (arch.l, x_true.cols());
    let mut da_re = Array2::<f64>::zeros((l, n));
    let mut da_im = Array2::<f64>::zeros((l, n));
    let mut dy_re = Array2::<f64>::zeros((l, cols));
    let mut dy_im = Array2::<f64>::zeros((l, cols));
    let mut dc = Array1::<f64>::zeros(n);

    for k in (1..=arch.u).rev() {
        let lt = &trace.layers[k - 1];
        let x = &trace.states[k - 1];
        let gamma = lt.gamma;
        let (w_re, w_im) = (lt.w.re(), lt.w.im());
        let mut dw_re = Array2::<f64>::zeros((n, cols));
        let mut dw_im = Array2::<f64>::zeros((n, cols));
        for b in 0..trace.batch {
            for i in 0..n {
                let norm = lt.w_norm[[i, b]];
                if norm <= lambda || norm == 0.0 {
                    continue;
                }
                let shrink = 1.0 - lambda / norm;
                let cols_b = b * m..(b + 1) * m;
                let mut gw = 0.0;
                for col in cols_b.clone() {
                    gw += gamma * (dx_re[[i, col]] * w_re[[i, col]] + dx_im[[i, col]] * w_im[[i, col]]);
                }
                let along = lambda * gw / (c[i] * norm * norm * norm);
                for col in cols_b {
                    dw_re[[i, col]] = gamma * dx_re[[i, col]] * shrink / c[i] + along * w_re[[i, col]];
                    dw_im[[i, col]] = gamma * dx_im[[i, col]] * shrink / c[i] + along * w_im[[i, col]];
                }
                dc[i] -= gw * shrink / (c[i] * c[i]);
            }
        }

        // W = diag(c)·X − Aᴴ(AX − Y).
        let mut prev_re = &dx_re * (1.0 - gamma);
        let mut prev_im = &dx_im * (1.0 - gamma);
        let c_col = c.view().insert_axis(Axis(1));
        prev_re += &(&c_col * &dw_re);
        prev_im += &(&c_col * &dw_im);
        dc += &((&dw_re * x.re() + &dw_im * x.im()).sum_axis(Axis(1)));

        // dG = −dW, dR = A·dG.
        let dr_re = ai.dot(&dw_im) - ar.dot(&dw_re);
        let dr_im = -(ai.dot(&dw_re) + ar.dot(&dw_im));
        let (r_re, r_im) = (lt.residual.re(), lt.residual.im());
        // dA += R·dGᴴ + dR·Xᴴ.
        da_re -= &(r_re.dot(&dw_re.t()) + r_im.dot(&dw_im.t()));
        da_im -= &(r_im.dot(&dw_re.t()) - r_re.dot(&dw_im.t()));
        da_re += &(dr_re.dot(&x.re().t()) + dr_im.dot(&x.im().t()));
        da_im += &(dr_im.dot(&x.re().t()) - dr_re.dot(&x.im().t()));
        // dX += Aᴴ·dR, dY −= dR.
        prev_re += &(ar.t().dot(&dr_re) + ai.t().dot(&dr_im));
        prev_im += &(ar.t().dot(&dr_im) - ai.t().dot(&dr_re));
        dy_re -= &dr_re;
        dy_im -= &dr_im;

        dx_re = prev_re;
        dx_im = prev_im;
    }

    // c = squared column norms of A.
    let dc_row = dc.view().insert_axis(Axis(0));
    da_re += &(ar * &dc_row * 2.0);
    da_im += &(ai * &dc_row * 2.0);
    // Encoder Y = AX + Z.
    let (xr, xi) = (trace.x_in.re(), trace.x_in.im());
    da_re += &(dy_re.dot(&xr.t()) + dy_im.dot(&xi.t()));
    da_im += &(dy_im.dot(&xr.t()) - dy_re.dot(&xi.t()));

    grads.a = ComplexMatrix::new(da_re, da_im)?;
    Ok(grads)
}

/// Backpropagates through one correction branch, returning the layer
/// gradients and the gradient with respect to the row features.
fn branch_backward(
    layers: &[DenseLayer],
    trace: &BranchTrace,
    d_out: Array2<f64>,
) -> (Vec<DenseLayer>, Array2<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut dz = d_out;
    for j in (0..layers.len()).rev() {
        let h = &trace.inputs[j];
        grads.push(DenseLayer {
            weight: dz.t().dot(h),
            bias: dz.sum_axis(Axis(0)),
        });
        let mut dh = dz.dot(&layers[j].weight);
        if j > 0 {
            dh.zip_mut_with(&trace.pre[j - 1], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        dz = dh;
    }
    grads.reverse();
    (grads, dz)
}
