use super::{GradientSet, TrainingConfig};
use crate::net::NetworkParams;

/// First and second moment estimates, in the flat parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update, followed by the encoder column projection
/// when `cfg.project_columns` is set. Encoder gradients are ignored when the
/// encoder is frozen.
pub fn adam_step(params: &mut NetworkParams, grads: &GradientSet, cfg: &TrainingConfig, state: &mut AdamState) {
    let mut theta = params.to_flat();
    let g = grads.to_flat();
    assert_eq!(theta.len(), g.len());
    assert_eq!(theta.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let skip = if cfg.train_encoder { 0 } else { 2 * params.a.rows() * params.a.cols() };
    for j in skip..theta.len() {
        state.m[j] = b1 * state.m[j] + (1.0 - b1) * g[j];
        state.v[j] = b2 * state.v[j] + (1.0 - b2) * g[j] * g[j];
        let m_hat = state.m[j] / c1;
        let v_hat = state.v[j] / c2;
        theta[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    params.set_flat(&theta);
    if cfg.project_columns && cfg.train_encoder {
        params.project_columns();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetArch;
    use crate::solvers::StepSchedule;

    fn setup() -> (NetworkParams, TrainingConfig) {
        let arch = NetArch {
            n: 6,
            l: 3,
            m: 2,
            u: 1,
            v: 2,
            hidden: 4,
            lambda: 0.1,
            schedule: StepSchedule::default(),
        };
        (NetworkParams::init(arch, 1).unwrap(), TrainingConfig::default())
    }

    #[test]
    fn first_step_moves_each_parameter_by_the_learning_rate() {
        let (p, mut cfg) = setup();
        cfg.project_columns = false;
        let mut g = GradientSet::zeros_like(&p);
        let before = p.to_flat();
        let mut vals = g.a.re().clone();
        for (j, v) in vals.iter_mut().enumerate() {
            *v = if j % 2 == 0 { 0.3 + j as f64 } else { -2.0e-2 * (j + 1) as f64 };
        }
        *g.a.re_mut() = vals;
        g.real_branch[1].bias.fill(5.0);
        let mut q = p.clone();
        let mut st = AdamState::new(p.num_params());
        adam_step(&mut q, &g, &cfg, &mut st);
        let gf = g.to_flat();
        for ((a, b), gj) in before.iter().zip(q.to_flat()).zip(gf) {
            if gj == 0.0 {
                assert_eq!(*a, b);
            } else {
                let moved = a - b;
                assert!((moved.abs() - cfg.learning_rate).abs() <= 1e-6 * cfg.learning_rate);
                assert_eq!(moved.signum(), gj.signum());
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_moments() {
        let (p, cfg) = setup();
        let mut q = p.clone();
        let mut st = AdamState::new(p.num_params());
        for _ in 0..3 {
            adam_step(&mut q, &GradientSet::zeros_like(&p), &cfg, &mut st);
        }
        assert_eq!(q, p);
        assert!(st.m.iter().chain(&st.v).all(|&v| v == 0.0));
        assert_eq!(st.t, 3);
    }

    #[test]
    fn projection_restores_column_norms() {
        let (p, cfg) = setup();
        let mut g = GradientSet::zeros_like(&p);
        g.a.re_mut().fill(1.0);
        *g.a.im_mut() = p.a.im().mapv(|v| -v);
        let mut q = p.clone();
        let mut st = AdamState::new(p.num_params());
        adam_step(&mut q, &g, &cfg, &mut st);
        assert_ne!(q.a, p.a);
        for c in 0..6 {
            assert!((q.a.column_norm_sq(c).sqrt() - 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_encoder_is_not_updated() {
        let (p, mut cfg) = setup();
        cfg.train_encoder = false;
        let mut g = GradientSet::zeros_like(&p);
        g.a.re_mut().fill(1.0);
        g.imag_branch[0].weight.fill(1.0);
        let mut q = p.clone();
        adam_step(&mut q, &g, &cfg, &mut AdamState::new(p.num_params()));
        assert_eq!(q.a, p.a);
        assert_ne!(q.imag_branch[0].weight, p.imag_branch[0].weight);
    }
}
