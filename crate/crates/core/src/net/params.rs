use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{real_from_lines, real_to_lines, ComplexMatrix};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};
use crate::signal::{gen_measurement_matrix, normalize_columns};
use crate::solvers::StepSchedule;

/// Fixed hyper-structure of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetArch {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Unrolled PCD layers.
    #[serde(rename = "U")]
    pub u: usize,
    /// Correction layers; 0 bypasses the correction part.
    #[serde(rename = "V")]
    pub v: usize,
    /// Width of the V−1 hidden correction layers.
    pub hidden: usize,
    /// GROUP LASSO weight used inside the unrolled layers (not trained).
    pub lambda: f64,
    pub schedule: StepSchedule,
}

impl NetArch {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 || self.m == 0 {
            return Err(Error::config("net", "N, L and M must be positive"));
        }
        if self.v > 1 && self.hidden == 0 {
            return Err(Error::config("net.hidden", "must be positive when V > 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("net.lambda", "must be finite and >= 0"));
        }
        self.schedule.validate()
    }

    /// `(fan_in, fan_out)` of correction layer `j`.
    pub fn layer_dims(&self, j: usize) -> (usize, usize) {
        let fan_in = if j == 0 { 2 * self.m } else { self.hidden };
        let fan_out = if j + 1 == self.v { self.m } else { self.hidden };
        (fan_in, fan_out)
    }
}

/// Dense layer computing `W·h + b`; `weight` is `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub arch: NetArch,
    /// Encoder weights; also the matrix used inside every unrolled layer.
    pub a: ComplexMatrix,
    pub real_branch: Vec<DenseLayer>,
    pub imag_branch: Vec<DenseLayer>,
}

impl NetworkParams {
    /// Encoder from normalized CN(0, 1) pilots; correction weights uniform in
    /// ±√(6/(fan_in+fan_out)) with zero biases.
    pub fn init(arch: NetArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let a = gen_measurement_matrix(
            arch.l,
            arch.n,
            RngStream::for_purpose(seed, Purpose::NetInit, 0),
            true,
        );
        let mut rng = RngStream::for_purpose(seed, Purpose::NetInit, 1).rng();
        let branch = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<DenseLayer> {
            (0..arch.v)
                .map(|j| {
                    let (fi, fo) = arch.layer_dims(j);
                    let bound = (6.0 / (fi + fo) as f64).sqrt();
                    let mut layer = DenseLayer::zeros(fi, fo);
                    layer.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
                    layer
                })
                .collect()
        };
        let real_branch = branch(&mut rng);
        let imag_branch = branch(&mut rng);
        Ok(Self {
            arch,
            a,
            real_branch,
            imag_branch,
        })
    }

    /// Network whose encoder is the given matrix, with the given correction
    /// layers (may be empty when `arch.v == 0`).
    pub fn from_parts(
        arch: NetArch,
        a: ComplexMatrix,
        real_branch: Vec<DenseLayer>,
        imag_branch: Vec<DenseLayer>,
    ) -> Result<Self> {
        arch.validate()?;
        let p = Self {
            arch,
            a,
            real_branch,
            imag_branch,
        };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let arch = &self.arch;
        if self.a.dim() != (arch.l, arch.n) {
            return Err(Error::shape("encoder", (arch.l, arch.n), self.a.dim()));
        }
        for branch in [&self.real_branch, &self.imag_branch] {
            if branch.len() != arch.v {
                return Err(Error::config(
                    "net.V",
                    format!("expected {} correction layers, found {}", arch.v, branch.len()),
                ));
            }
            for (j, layer) in branch.iter().enumerate() {
                let (fi, fo) = arch.layer_dims(j);
                if layer.weight.dim() != (fo, fi) || layer.bias.len() != fo {
                    return Err(Error::shape("correction layer", (fo, fi), layer.weight.dim()));
                }
            }
        }
        Ok(())
    }

    /// Rescales every encoder column (re and im jointly) to norm √L.
    pub fn project_columns(&mut self) {
        normalize_columns(&mut self.a, (self.arch.l as f64).sqrt());
    }

    pub fn num_params(&self) -> usize {
        2 * self.a.rows() * self.a.cols()
            + self
                .real_branch
                .iter()
                .chain(&self.imag_branch)
                .map(|l| l.weight.len() + l.bias.len())
                .sum::<usize>()
    }

    /// All trainable values in a fixed order: Re(A), Im(A), then each real
    /// branch layer (weight, bias), then each imaginary branch layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(self.a.re().iter());
        out.extend(self.a.im().iter());
        for layer in self.real_branch.iter().chain(&self.imag_branch) {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter().copied();
        for v in self.a.re_mut().iter_mut() {
            *v = it.next().unwrap();
        }
        for v in self.a.im_mut().iter_mut() {
            *v = it.next().unwrap();
        }
        for layer in self.real_branch.iter_mut().chain(self.imag_branch.iter_mut()) {
            for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *v = it.next().unwrap();
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weight: Vec<String>,
    bias: Vec<String>,
}

/// On-disk checkpoint. Matrices are embedded as arrays of text lines
/// (`rows cols` header, then rows) at full 17-digit precision.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    format: u32,
    arch: NetArch,
    a: Vec<String>,
    real_branch: Vec<LayerFile>,
    imag_branch: Vec<LayerFile>,
}

const FORMAT_VERSION: u32 = 1;

impl From<&NetworkParams> for ParamsFile {
    fn from(p: &NetworkParams) -> Self {
        let layers = |b: &[DenseLayer]| {
            b.iter()
                .map(|l| LayerFile {
                    weight: real_to_lines(&l.weight),
                    bias: real_to_lines(&l.bias.clone().insert_axis(ndarray::Axis(0))),
                })
                .collect()
        };
        ParamsFile {
            format: FORMAT_VERSION,
            arch: p.arch,
            a: p.a.text_lines(),
            real_branch: layers(&p.real_branch),
            imag_branch: layers(&p.imag_branch),
        }
    }
}

impl TryFrom<ParamsFile> for NetworkParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        if f.format != FORMAT_VERSION {
            return Err(Error::config("format", format!("unsupported version {}", f.format)));
        }
        let layers = |b: Vec<LayerFile>| -> Result<Vec<DenseLayer>> {
            b.into_iter()
                .map(|l| {
                    let bias = real_from_lines(&l.bias)?;
                    Ok(DenseLayer {
                        weight: real_from_lines(&l.weight)?,
                        bias: bias.row(0).to_owned(),
                    })
                })
                .collect()
        };
        let a = ComplexMatrix::from_text(&f.a.join("\n"))?;
        NetworkParams::from_parts(f.arch, a, layers(f.real_branch)?, layers(f.imag_branch)?)
    }
}
