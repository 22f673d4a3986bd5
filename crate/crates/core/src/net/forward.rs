use ndarray::{s, Array1, Array2, Axis};

use super::params::{DenseLayer, NetworkParams};
use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::signal::{gen_noise, NoiseModel};
use crate::solvers::soft_threshold;

/// Iterate `X⁽ᵏ⁾` of the unrolled recursion (`N × B·M`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub x: ComplexMatrix,
}

impl LayerState {
    pub fn zeros(n: usize, cols: usize) -> Self {
        Self {
            x: ComplexMatrix::zeros(n, cols),
        }
    }
}

/// Intermediates of one unrolled layer kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// `AX⁽ᵏ⁻¹⁾ − Y`.
    pub residual: ComplexMatrix,
    /// Pre-threshold rows `w`.
    pub w: ComplexMatrix,
    /// `‖w‖` per (row, sample), `N × B`.
    pub w_norm: Array2<f64>,
    pub gamma: f64,
}

/// Intermediates of one correction branch: the input to every layer and the
/// pre-activations of the hidden layers.
#[derive(Debug, Clone, Default)]
pub struct BranchTrace {
    pub inputs: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
}

/// Everything the backward pass needs from one forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub m: usize,
    pub batch: usize,
    pub x_in: ComplexMatrix,
    /// Noise realization injected by the encoder.
    pub noise: ComplexMatrix,
    pub y: ComplexMatrix,
    pub col_norm_sq: Array1<f64>,
    /// `X⁽⁰⁾ … X⁽ᵁ⁾`.
    pub states: Vec<ComplexMatrix>,
    pub layers: Vec<LayerTrace>,
    pub real_branch: BranchTrace,
    pub imag_branch: BranchTrace,
    pub x_hat: ComplexMatrix,
}

fn batch_of(params: &NetworkParams, cols: usize) -> Result<usize> {
    let m = params.arch.m;
    if cols == 0 || !cols.is_multiple_of(m) {
        return Err(Error::shape("batch columns", (params.arch.n, m), (params.arch.n, cols)));
    }
    Ok(cols / m)
}

/// `Y = AX + Z` with a fresh noise draw of variance σ²/2 per real component.
pub fn encoder_forward(
    params: &NetworkParams,
    x: &ComplexMatrix,
    noise: NoiseModel,
    stream: RngStream,
) -> Result<ComplexMatrix> {
    let ax = params.a.matmul(x)?;
    let z = gen_noise(ax.rows(), ax.cols(), noise, stream);
    ax.add(&z)
}

/// One PCD-MMV iteration (layer `k ≥ 1`) in real arithmetic.
pub fn pcd_layer_forward(
    params: &NetworkParams,
    state: &LayerState,
    y: &ComplexMatrix,
    k: usize,
) -> Result<LayerState> {
    let c = params.a.column_norms_sq();
    let (next, _) = layer_step(params, &c, &state.x, y, k)?;
    Ok(LayerState { x: next })
}

fn layer_step(
    params: &NetworkParams,
    c: &Array1<f64>,
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    k: usize,
) -> Result<(ComplexMatrix, LayerTrace)> {
    let arch = &params.arch;
    let (n, m) = (arch.n, arch.m);
    if x.rows() != n || x.cols() != y.cols() {
        return Err(Error::shape("pcd_layer_forward", x.dim(), y.dim()));
    }
    let batch = batch_of(params, x.cols())?;
    let a = &params.a;
    let (ar, ai) = (a.re(), a.im());
    let (xr, xi) = (x.re(), x.im());

    // Re/Im of AX − Y.
    let r_re = ar.dot(xr) - ai.dot(xi) - y.re();
    let r_im = ai.dot(xr) + ar.dot(xi) - y.im();
    // Re/Im of Aᴴ(AX − Y).
    let g_re = ar.t().dot(&r_re) + ai.t().dot(&r_im);
    let g_im = ar.t().dot(&r_im) - ai.t().dot(&r_re);
    let c_col = c.view().insert_axis(Axis(1));
    let w_re = &c_col * xr - &g_re;
    let w_im = &c_col * xi - &g_im;

    let gamma = arch.schedule.gamma(k);
    let mut next_re = xr * (1.0 - gamma);
    let mut next_im = xi * (1.0 - gamma);
    let mut w_norm = Array2::zeros((n, batch));
    for b in 0..batch {
        let cols = s![.., b * m..(b + 1) * m];
        let (wr, wi) = (w_re.slice(cols), w_im.slice(cols));
        for i in 0..n {
            let (rr, ri) = (wr.row(i), wi.row(i));
            let norm = (rr.dot(&rr) + ri.dot(&ri)).sqrt();
            w_norm[[i, b]] = norm;
            let mag = soft_threshold(norm / c[i], 1.0 / c[i], arch.lambda);
            if norm > 0.0 && mag != 0.0 {
                let f = mag / norm;
                for col in 0..m {
                    next_re[[i, b * m + col]] += gamma * (rr[col] * f);
                    next_im[[i, b * m + col]] += gamma * (ri[col] * f);
                }
            }
        }
    }
    if next_re.iter().chain(next_im.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            stage: "pcd_layer_forward",
            iteration: k,
        });
    }
    let trace = LayerTrace {
        residual: ComplexMatrix::new(r_re, r_im)?,
        w: ComplexMatrix::new(w_re, w_im)?,
        w_norm,
        gamma,
    };
    Ok((ComplexMatrix::new(next_re, next_im)?, trace))
}

/// `U` unrolled layers from `X⁽⁰⁾ = 0`.
pub fn approximation_forward(params: &NetworkParams, y: &ComplexMatrix) -> Result<LayerState> {
    let c = params.a.column_norms_sq();
    let mut x = ComplexMatrix::zeros(params.arch.n, y.cols());
    for k in 1..=params.arch.u {
        x = layer_step(params, &c, &x, y, k)?.0;
    }
    Ok(LayerState { x })
}

/// Row-wise correction; the identity when `V = 0`.
pub fn correction_forward(params: &NetworkParams, state: &LayerState) -> Result<ComplexMatrix> {
    let (x_hat, _, _) = correction_traced(params, &state.x)?;
    Ok(x_hat)
}

/// Features `[Re row ‖ Im row]` for every (sample, row), ordered `b·N + i`.
fn row_features(x: &ComplexMatrix, m: usize) -> Array2<f64> {
    let (n, cols) = x.dim();
    let batch = cols / m;
    let mut f = Array2::zeros((batch * n, 2 * m));
    for b in 0..batch {
        let cols = s![.., b * m..(b + 1) * m];
        f.slice_mut(s![b * n..(b + 1) * n, ..m]).assign(&x.re().slice(cols));
        f.slice_mut(s![b * n..(b + 1) * n, m..]).assign(&x.im().slice(cols));
    }
    f
}

/// Inverse of the row layout: `(B·N) × M` outputs back to `N × B·M`.
pub(crate) fn unstack_rows(out: &Array2<f64>, n: usize, m: usize) -> Array2<f64> {
    let batch = out.nrows() / n;
    let mut x = Array2::zeros((n, batch * m));
    for b in 0..batch {
        x.slice_mut(s![.., b * m..(b + 1) * m])
            .assign(&out.slice(s![b * n..(b + 1) * n, ..]));
    }
    x
}

/// Inverse of [`unstack_rows`] for gradients.
pub(crate) fn stack_rows(x: &Array2<f64>, m: usize) -> Array2<f64> {
    let (n, cols) = x.dim();
    let batch = cols / m;
    let mut out = Array2::zeros((batch * n, m));
    for b in 0..batch {
        out.slice_mut(s![b * n..(b + 1) * n, ..])
            .assign(&x.slice(s![.., b * m..(b + 1) * m]));
    }
    out
}

fn branch_forward(layers: &[DenseLayer], features: &Array2<f64>) -> (Array2<f64>, BranchTrace) {
    let mut trace = BranchTrace::default();
    let mut h = features.clone();
    for (j, layer) in layers.iter().enumerate() {
        let z = h.dot(&layer.weight.t()) + &layer.bias;
        trace.inputs.push(h);
        if j + 1 < layers.len() {
            h = z.mapv(|v| v.max(0.0));
            trace.pre.push(z);
        } else {
            h = z;
        }
    }
    (h, trace)
}

fn correction_traced(
    params: &NetworkParams,
    x: &ComplexMatrix,
) -> Result<(ComplexMatrix, BranchTrace, BranchTrace)> {
    let arch = &params.arch;
    if arch.v == 0 {
        return Ok((x.clone(), BranchTrace::default(), BranchTrace::default()));
    }
    params.check_shapes()?;
    batch_of(params, x.cols())?;
    let features = row_features(x, arch.m);
    let (out_re, tr_re) = branch_forward(&params.real_branch, &features);
    let (out_im, tr_im) = branch_forward(&params.imag_branch, &features);
    let x_hat = ComplexMatrix::new(
        unstack_rows(&out_re, arch.n, arch.m),
        unstack_rows(&out_im, arch.n, arch.m),
    )?;
    Ok((x_hat, tr_re, tr_im))
}

/// Full pass over a batch with a given noise realization, keeping every
/// intermediate needed for gradients.
pub fn forward_batch(params: &NetworkParams, x: &ComplexMatrix, noise: &ComplexMatrix) -> Result<ForwardTrace> {
    let arch = &params.arch;
    if x.rows() != arch.n {
        return Err(Error::shape("forward_batch", (arch.n, arch.m), x.dim()));
    }
    let batch = batch_of(params, x.cols())?;
    if noise.dim() != (arch.l, x.cols()) {
        return Err(Error::shape("forward_batch noise", (arch.l, x.cols()), noise.dim()));
    }
    let y = params.a.matmul(x)?.add(noise)?;
    let c = params.a.column_norms_sq();
    let mut states = Vec::with_capacity(arch.u + 1);
    let mut layers = Vec::with_capacity(arch.u);
    states.push(ComplexMatrix::zeros(arch.n, x.cols()));
    for k in 1..=arch.u {
        let (next, trace) = layer_step(params, &c, states.last().unwrap(), &y, k)?;
        states.push(next);
        layers.push(trace);
    }
    let (x_hat, real_branch, imag_branch) = correction_traced(params, states.last().unwrap())?;
    Ok(ForwardTrace {
        m: arch.m,
        batch,
        x_in: x.clone(),
        noise: noise.clone(),
        y,
        col_norm_sq: c,
        states,
        layers,
        real_branch,
        imag_branch,
        x_hat,
    })
}

/// Encoder, approximation part and correction part in sequence.
pub fn autoencoder_forward(
    params: &NetworkParams,
    x: &ComplexMatrix,
    noise: NoiseModel,
    stream: RngStream,
) -> Result<ComplexMatrix> {
    let y = encoder_forward(params, x, noise, stream)?;
    let state = approximation_forward(params, &y)?;
    correction_forward(params, &state)
}
