use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::NetArch;
use crate::signal::{NoiseModel, Scenario, SparsityConfig, SparsityPattern};
use crate::solvers::{SolverOptions, StepSchedule};
use crate::training::TrainingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Bcd,
    Pcd,
    Amp,
    /// The trained auto-encoder's decoder.
    Learned,
    /// BCD-MMV with the trained encoder as measurement matrix.
    GroupLassoDl,
    /// The AMP baseline with the trained encoder as measurement matrix.
    AmpDl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bcd => "BCD",
            Algorithm::Pcd => "PCD",
            Algorithm::Amp => "AMP",
            Algorithm::Learned => "LEARNED",
            Algorithm::GroupLassoDl => "GROUP_LASSO_DL",
            Algorithm::AmpDl => "AMP_DL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Algorithm::Bcd,
            Algorithm::Pcd,
            Algorithm::Amp,
            Algorithm::Learned,
            Algorithm::GroupLassoDl,
            Algorithm::AmpDl,
        ]
        .into_iter()
        .find(|a| a.name().eq_ignore_ascii_case(s))
    }

    pub fn needs_params(self) -> bool {
        matches!(self, Algorithm::Learned | Algorithm::GroupLassoDl | Algorithm::AmpDl)
    }

    pub fn uses_lambda_grid(self) -> bool {
        matches!(self, Algorithm::Bcd | Algorithm::Pcd | Algorithm::GroupLassoDl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Iid,
    Grouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub mode: Mode,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(rename = "G", default)]
    pub g: Option<usize>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

fn default_sigma2() -> f64 {
    0.1
}

impl ScenarioSection {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let pattern = match self.mode {
            Mode::Iid => SparsityPattern::Iid {
                p: self
                    .p
                    .ok_or_else(|| Error::config("scenario.p", "required when mode is \"iid\""))?,
            },
            Mode::Grouped => SparsityPattern::Grouped {
                groups: self
                    .g
                    .ok_or_else(|| Error::config("scenario.G", "required when mode is \"grouped\""))?,
            },
        };
        let s = Scenario {
            sparsity: SparsityConfig { n: self.n, pattern },
            l: self.l,
            m: self.m,
            noise: NoiseModel { sigma2: self.sigma2 },
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub noise: u64,
    pub init: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            data: 1,
            noise: 2,
            init: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub k_max: usize,
    pub stop_tol: f64,
    pub schedule: StepSchedule,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            k_max: o.k_max,
            stop_tol: o.stop_tol,
            schedule: StepSchedule::default(),
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            k_max: self.k_max,
            stop_tol: self.stop_tol,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "V")]
    pub v: usize,
    /// Hidden width of the correction layers; defaults to 4M.
    pub hidden: Option<usize>,
    /// Absolute λ inside the unrolled layers. When absent, 0.1 times the mean
    /// zero-solution threshold of the validation set under the initial encoder.
    pub lambda: Option<f64>,
    /// Step schedule of the unrolled layers; defaults to a constant `L/N`.
    pub schedule: Option<StepSchedule>,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            u: 20,
            v: 3,
            hidden: None,
            lambda: None,
            schedule: None,
        }
    }
}

impl NetSection {
    /// Architecture for a scenario, with `lambda` filled in by the caller when
    /// not configured.
    pub fn arch(&self, s: &Scenario, lambda: f64) -> NetArch {
        NetArch {
            n: s.n(),
            l: s.l,
            m: s.m,
            u: self.u,
            v: self.v,
            hidden: self.hidden.unwrap_or(4 * s.m),
            lambda,
            schedule: self
                .schedule
                .unwrap_or_else(|| StepSchedule::constant((s.l as f64 / s.n() as f64).min(1.0))),
        }
    }
}

/// Grid for `bench --study sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Undersampling ratios L/N.
    pub ratios: Vec<f64>,
    /// Access probabilities p (i.i.d. mode only).
    pub probabilities: Vec<f64>,
    /// Timed repetitions per (algorithm, grid point) after one warm-up run.
    pub timing_reps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ratios: vec![0.15, 0.2, 0.25, 0.3],
            probabilities: vec![0.05, 0.1, 0.15, 0.2],
            timing_reps: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Multipliers of each sample's zero-solution threshold.
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(rename = "T", default = "default_t")]
    pub t: usize,
    /// Validation samples used for λ selection.
    #[serde(default = "default_validation")]
    pub validation: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub train: TrainingConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    /// Trained network checkpoint; `{L}` is replaced by the grid point's L.
    #[serde(default)]
    pub params: Option<String>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Bcd, Algorithm::Pcd]
}

fn default_lambda_grid() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2]
}

fn default_t() -> usize {
    1000
}

fn default_validation() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_owned() } else { path };
            Error::config(field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.to_scenario()?;
        if self.t == 0 {
            return Err(Error::config("T", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must name at least one algorithm"));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::config("lambda_grid", "must be a non-empty list of finite values >= 0"));
        }
        if self.validation == 0 && self.algorithms.iter().any(|a| a.uses_lambda_grid()) && self.lambda_grid.len() > 1 {
            return Err(Error::config("validation", "must be at least 1 to tune lambda"));
        }
        if self.params.is_none() {
            if let Some(a) = self.algorithms.iter().find(|a| a.needs_params()) {
                return Err(Error::config("params", format!("{} needs a trained checkpoint", a.name())));
            }
        }
        if self.solver.k_max == 0 {
            return Err(Error::config("solver.k_max", "must be at least 1"));
        }
        self.solver.schedule.validate()?;
        if let Some(s) = &self.net.schedule {
            s.validate()?;
        }
        if let Some(l) = self.net.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config("net.lambda", "must be finite and >= 0"));
            }
        }
        if self.sweep.timing_reps == 0 {
            return Err(Error::config("sweep.timing_reps", "must be at least 1"));
        }
        self.train.validate()
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.to_scenario().expect("validated on load")
    }

    /// Checkpoint path for a grid point with `l` measurements.
    pub fn params_path(&self, l: usize) -> Option<PathBuf> {
        self.params.as_ref().map(|p| PathBuf::from(p.replace("{L}", &l.to_string())))
    }
}
