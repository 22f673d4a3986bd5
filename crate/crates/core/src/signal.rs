//! Jointly sparse signal generation and the noisy linear measurement model
//! `Y = AX + Z`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, Purpose, RngStream};

/// How the active set is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SparsityPattern {
    /// Each index active independently with probability `p`.
    Iid { p: f64 },
    /// Indices split into `groups` contiguous blocks; exactly one block is active.
    Grouped { groups: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConfig {
    pub n: usize,
    pub pattern: SparsityPattern,
}

impl SparsityConfig {
    pub fn iid(n: usize, p: f64) -> Self {
        Self {
            n,
            pattern: SparsityPattern::Iid { p },
        }
    }

    pub fn grouped(n: usize, groups: usize) -> Self {
        Self {
            n,
            pattern: SparsityPattern::Grouped { groups },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("scenario.N", "must be at least 1"));
        }
        match self.pattern {
            SparsityPattern::Iid { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::config("scenario.p", format!("{p} is outside [0, 1]")))
            }
            SparsityPattern::Grouped { groups } if groups == 0 || !self.n.is_multiple_of(groups) => Err(
                Error::config("scenario.G", format!("{groups} must be >= 1 and divide N = {}", self.n)),
            ),
            _ => Ok(()),
        }
    }

    /// `p` for i.i.d. access, `1/G` for grouped access.
    pub fn access_probability(&self) -> f64 {
        match self.pattern {
            SparsityPattern::Iid { p } => p,
            SparsityPattern::Grouped { groups } => 1.0 / groups as f64,
        }
    }
}

/// Common support of the columns of X, as sorted 0-based row indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Support {
    pub active: Vec<usize>,
}

impl Support {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config("scenario.sigma2", "must be finite and >= 0"));
        }
        Ok(())
    }
}

pub fn gen_support(cfg: &SparsityConfig, stream: RngStream) -> Result<Support> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let active = match cfg.pattern {
        SparsityPattern::Iid { p } => (0..cfg.n).filter(|_| rng.random::<f64>() < p).collect(),
        SparsityPattern::Grouped { groups } => {
            let size = cfg.n / groups;
            let g = rng.random_range(0..groups);
            (g * size..(g + 1) * size).collect()
        }
    };
    Ok(Support { active })
}

/// Rows in the support get i.i.d. CN(0, 1) entries; all other rows are zero.
pub fn gen_signals(support: &Support, n: usize, m: usize, stream: RngStream) -> Result<ComplexMatrix> {
    if let Some(&bad) = support.active.iter().find(|&&i| i >= n) {
        return Err(Error::config("support", format!("index {bad} out of range for N = {n}")));
    }
    let mut rng = stream.rng();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = ComplexMatrix::zeros(n, m);
    for &i in &support.active {
        for c in 0..m {
            let re = scale * standard_normal(&mut rng);
            let im = scale * standard_normal(&mut rng);
            x.set(i, c, (re, im));
        }
    }
    Ok(x)
}

/// L×N pilot matrix with i.i.d. CN(0, 1) entries, optionally rescaled so that
/// every column has norm √L.
pub fn gen_measurement_matrix(l: usize, n: usize, stream: RngStream, normalize: bool) -> ComplexMatrix {
    let mut rng = stream.rng();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = ComplexMatrix::zeros(l, n);
    for r in 0..l {
        for c in 0..n {
            let re = scale * standard_normal(&mut rng);
            let im = scale * standard_normal(&mut rng);
            a.set(r, c, (re, im));
        }
    }
    if normalize {
        normalize_columns(&mut a, (l as f64).sqrt());
    }
    a
}

/// Rescales every column to Euclidean norm `target`. Zero columns, and
/// columns already within a few ulps of `target`, are left untouched so that
/// the projection is exactly idempotent.
pub fn normalize_columns(a: &mut ComplexMatrix, target: f64) {
    for c in 0..a.cols() {
        let norm = a.column_norm_sq(c).sqrt();
        if norm > 0.0 && (norm - target).abs() > 4.0 * f64::EPSILON * target {
            let f = target / norm;
            a.re_mut().column_mut(c).mapv_inplace(|v| v * f);
            a.im_mut().column_mut(c).mapv_inplace(|v| v * f);
        }
    }
}

/// Z with i.i.d. CN(0, σ²) entries (each real component N(0, σ²/2)).
pub fn gen_noise(rows: usize, cols: usize, noise: NoiseModel, stream: RngStream) -> ComplexMatrix {
    let mut z = ComplexMatrix::zeros(rows, cols);
    if noise.sigma2 == 0.0 {
        return z;
    }
    let mut rng = stream.rng();
    let sd = (noise.sigma2 / 2.0).sqrt();
    for r in 0..rows {
        for c in 0..cols {
            let re = sd * standard_normal(&mut rng);
            let im = sd * standard_normal(&mut rng);
            z.set(r, c, (re, im));
        }
    }
    z
}

pub fn measure(
    a: &ComplexMatrix,
    x: &ComplexMatrix,
    noise: NoiseModel,
    stream: RngStream,
) -> Result<ComplexMatrix> {
    let ax = a.matmul(x)?;
    if noise.sigma2 == 0.0 {
        return Ok(ax);
    }
    let z = gen_noise(ax.rows(), ax.cols(), noise, stream);
    ax.add(&z)
}

/// A full experiment scenario: dimensions, sparsity pattern and noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub sparsity: SparsityConfig,
    pub l: usize,
    pub m: usize,
    pub noise: NoiseModel,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.sparsity.n
    }

    pub fn validate(&self) -> Result<()> {
        self.sparsity.validate()?;
        self.noise.validate()?;
        if self.l == 0 {
            return Err(Error::config("scenario.L", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("scenario.M", "must be at least 1"));
        }
        Ok(())
    }

    /// Signal matrix of sample `index` (support and entries from `data_seed`).
    pub fn signal(&self, data_seed: u64, index: u64) -> Result<ComplexMatrix> {
        let support = gen_support(
            &self.sparsity,
            RngStream::for_purpose(data_seed, Purpose::Support, index),
        )?;
        gen_signals(
            &support,
            self.n(),
            self.m,
            RngStream::for_purpose(data_seed, Purpose::Signal, index),
        )
    }

    /// Noise realization of sample `index`, independent of the pilots used.
    pub fn noise_draw(&self, noise_seed: u64, index: u64) -> ComplexMatrix {
        gen_noise(
            self.l,
            self.m,
            self.noise,
            RngStream::for_purpose(noise_seed, Purpose::Noise, index),
        )
    }
}
