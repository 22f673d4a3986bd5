//! Reproducible studies over seeded sample sets, with CSV reports.
//!
//! Sample `t` of a set is fully determined by the data and noise seeds and
//! its index, so every study can be rerun bit-exactly.

mod config;
mod report;

pub use config::{
    Algorithm, ExperimentConfig, Mode, NetSection, ScenarioSection, Seeds, SolverSection, SweepSection,
};
pub use report::{
    load_report, read_report, save_curves, save_report, save_training_curve, write_report, CurveRow,
    ReportRow, ReportWriter, REPORT_HEADER,
};

use std::path::Path;
use std::time::Instant;

use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::net::NetworkParams;
use crate::parallel::{map_slice, Execution};
use crate::rng::{split, Purpose, RngStream};
use crate::signal::{gen_measurement_matrix, Scenario, SparsityPattern};
use crate::solvers::{
    amp_mmv_baseline, bcd_mmv, bcd_mmv_observed, kkt_threshold, pcd_mmv, pcd_mmv_observed, AmpOptions,
    GroupLassoProblem, SolverOptions,
};
use crate::training::{decode, train_observed, EpochRecord, TrainingOutcome};

/// Signals with matching noise realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub xs: Vec<ComplexMatrix>,
    pub zs: Vec<ComplexMatrix>,
}

impl SampleSet {
    fn generate(s: &Scenario, seeds: &Seeds, offset: u64, count: usize) -> Result<Self> {
        let xs = (0..count as u64)
            .map(|t| s.signal(seeds.data, offset + t))
            .collect::<Result<Vec<_>>>()?;
        let zs = (0..count as u64).map(|t| s.noise_draw(seeds.noise, offset + t)).collect();
        Ok(Self { xs, zs })
    }

    pub fn test(s: &Scenario, seeds: &Seeds, count: usize) -> Result<Self> {
        Self::generate(s, seeds, split::TEST, count)
    }

    pub fn validation(s: &Scenario, seeds: &Seeds, count: usize) -> Result<Self> {
        Self::generate(s, seeds, split::VALIDATION, count)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `Y = AX + Z` for every sample.
    pub fn measure(&self, a: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
        self.xs
            .iter()
            .zip(&self.zs)
            .map(|(x, z)| a.matmul(x)?.add(z))
            .collect()
    }
}

/// `(1/(N·T)) Σₜ ‖X⁽ᵗ⁾ − X̂⁽ᵗ⁾‖²_F`.
pub fn eval_mse(x_true: &[ComplexMatrix], x_hat: &[ComplexMatrix]) -> Result<f64> {
    if x_true.len() != x_hat.len() || x_true.is_empty() {
        return Err(Error::shape("eval_mse sets", (x_true.len(), 0), (x_hat.len(), 0)));
    }
    let n = x_true[0].rows();
    let mut total = 0.0;
    for (a, b) in x_true.iter().zip(x_hat) {
        total += a.sub(b)?.frobenius_norm_sq();
    }
    Ok(total / (n * x_true.len()) as f64)
}

/// Normalized i.i.d. Gaussian pilots, the non-learned measurement matrix.
pub fn gaussian_pilots(s: &Scenario, seeds: &Seeds) -> ComplexMatrix {
    gen_measurement_matrix(s.l, s.n(), RngStream::for_purpose(seeds.init, Purpose::Pilot, 0), true)
}

pub fn scenario_id(s: &Scenario) -> String {
    match s.sparsity.pattern {
        SparsityPattern::Iid { p } => format!("iid_N{}_L{}_M{}_p{}", s.n(), s.l, s.m, p),
        SparsityPattern::Grouped { groups } => format!("grouped_N{}_L{}_M{}_G{}", s.n(), s.l, s.m, groups),
    }
}

fn p_or_g(s: &Scenario) -> f64 {
    match s.sparsity.pattern {
        SparsityPattern::Iid { p } => p,
        SparsityPattern::Grouped { groups } => groups as f64,
    }
}

/// Mean zero-solution threshold of a set of measurements.
pub fn mean_kkt_threshold(a: &ComplexMatrix, ys: &[ComplexMatrix]) -> f64 {
    ys.iter().map(|y| kkt_threshold(a, y)).sum::<f64>() / ys.len().max(1) as f64
}

/// λ used inside the unrolled layers when the config leaves it open.
pub fn default_net_lambda(a: &ComplexMatrix, validation: &SampleSet) -> Result<f64> {
    Ok(0.1 * mean_kkt_threshold(a, &validation.measure(a)?))
}

/// How one algorithm decodes measurements.
#[derive(Debug, Clone, Copy)]
pub struct Recovery<'a> {
    pub alg: Algorithm,
    /// Measurement matrix the samples are measured with.
    pub a: &'a ComplexMatrix,
    pub params: Option<&'a NetworkParams>,
    /// Multiple of each sample's zero-solution threshold (GROUP LASSO solvers).
    pub lambda_mult: f64,
    pub solver: &'a SolverSection,
    pub access_prob: f64,
}

impl Recovery<'_> {
    /// Estimates for every measurement. Samples are independent, so they are
    /// spread over workers when `exec` is parallel.
    pub fn run(&self, ys: &[ComplexMatrix], exec: Execution) -> Result<Vec<ComplexMatrix>> {
        if self.alg == Algorithm::Learned {
            let params = self
                .params
                .ok_or_else(|| Error::config("params", "LEARNED needs a trained checkpoint"))?;
            return decode(params, ys, exec, 32);
        }
        let out = map_slice(exec, ys, |y| self.one(y));
        out.into_iter().collect()
    }

    fn one(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        let opts = self.solver.options();
        match self.alg {
            Algorithm::Bcd | Algorithm::GroupLassoDl => Ok(bcd_mmv(&self.problem(y)?, &opts)?.x_hat),
            Algorithm::Pcd => Ok(pcd_mmv(&self.problem(y)?, &opts, &self.solver.schedule)?.x_hat),
            Algorithm::Amp | Algorithm::AmpDl => {
                let amp = AmpOptions {
                    k_max: self.solver.k_max,
                    ..AmpOptions::default()
                };
                Ok(amp_mmv_baseline(self.a, y, self.access_prob, &amp)?.x_hat)
            }
            Algorithm::Learned => unreachable!("decoded in batches"),
        }
    }

    fn problem(&self, y: &ComplexMatrix) -> Result<GroupLassoProblem> {
        let lambda = self.lambda_mult * kkt_threshold(self.a, y);
        GroupLassoProblem::new(self.a.clone(), y.clone(), lambda)
    }
}

/// Grid value with the lowest validation MSE (first one on ties).
pub fn tune_lambda(rec: &Recovery, grid: &[f64], validation: &SampleSet, exec: Execution) -> Result<f64> {
    if grid.len() == 1 || !rec.alg.uses_lambda_grid() {
        return Ok(grid[0]);
    }
    let ys = validation.measure(rec.a)?;
    let mut best = (f64::INFINITY, grid[0]);
    for &c in grid {
        let r = Recovery { lambda_mult: c, ..*rec };
        let mse = eval_mse(&validation.xs, &r.run(&ys, exec)?)?;
        if mse < best.0 {
            best = (mse, c);
        }
    }
    Ok(best.1)
}

fn load_params(cfg: &ExperimentConfig, s: &Scenario) -> Result<NetworkParams> {
    let path = cfg
        .params_path(s.l)
        .ok_or_else(|| Error::config("params", "a trained checkpoint is required"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::config("params", format!("{}: {e}", path.display())))?;
    let p = NetworkParams::from_json(&text)?;
    if (p.arch.n, p.arch.l, p.arch.m) != (s.n(), s.l, s.m) {
        return Err(Error::config(
            "params",
            format!(
                "{} was trained for N={} L={} M={}, the scenario has N={} L={} M={}",
                path.display(),
                p.arch.n,
                p.arch.l,
                p.arch.m,
                s.n(),
                s.l,
                s.m
            ),
        ));
    }
    Ok(p)
}

/// Which scenario parameter a sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Only the configured scenario.
    Single,
    /// Undersampling ratios L/N; L is rounded to the nearest integer.
    Ratios(Vec<f64>),
    /// Access probabilities (i.i.d. mode).
    Probabilities(Vec<f64>),
}

impl Sweep {
    fn scenarios(&self, base: &Scenario) -> Result<Vec<Scenario>> {
        let out: Vec<Scenario> = match self {
            Sweep::Single => vec![*base],
            Sweep::Ratios(rs) => rs
                .iter()
                .map(|r| Scenario {
                    l: ((r * base.n() as f64).round() as usize).max(1),
                    ..*base
                })
                .collect(),
            Sweep::Probabilities(ps) => {
                if !matches!(base.sparsity.pattern, SparsityPattern::Iid { .. }) {
                    return Err(Error::config("scenario.mode", "an access-probability sweep needs i.i.d. mode"));
                }
                ps.iter()
                    .map(|&p| {
                        let mut s = *base;
                        s.sparsity.pattern = SparsityPattern::Iid { p };
                        s
                    })
                    .collect()
            }
        };
        for s in &out {
            s.validate()?;
        }
        Ok(out)
    }
}

/// Everything an algorithm needs at one grid point.
struct GridPoint {
    scenario: Scenario,
    test: SampleSet,
    validation: SampleSet,
    pilots: ComplexMatrix,
    params: Option<NetworkParams>,
}

impl GridPoint {
    fn new(cfg: &ExperimentConfig, scenario: Scenario) -> Result<Self> {
        let params = if cfg.algorithms.iter().any(|a| a.needs_params()) {
            Some(load_params(cfg, &scenario)?)
        } else {
            None
        };
        Ok(Self {
            test: SampleSet::test(&scenario, &cfg.seeds, cfg.t)?,
            validation: SampleSet::validation(&scenario, &cfg.seeds, cfg.validation)?,
            pilots: gaussian_pilots(&scenario, &cfg.seeds),
            params,
            scenario,
        })
    }

    fn recovery<'a>(&'a self, cfg: &'a ExperimentConfig, alg: Algorithm) -> Recovery<'a> {
        let a = match alg {
            Algorithm::Bcd | Algorithm::Pcd | Algorithm::Amp => &self.pilots,
            _ => &self.params.as_ref().expect("loaded for learned algorithms").a,
        };
        Recovery {
            alg,
            a,
            params: self.params.as_ref(),
            lambda_mult: cfg.lambda_grid[0],
            solver: &cfg.solver,
            access_prob: self.scenario.sparsity.access_probability(),
        }
    }

    fn row(&self, cfg: &ExperimentConfig, rec: &Recovery, mse: f64, wall_time_s: f64) -> ReportRow {
        let s = &self.scenario;
        let learned = rec.alg == Algorithm::Learned;
        let arch = self.params.as_ref().map(|p| p.arch);
        ReportRow {
            scenario_id: scenario_id(s),
            alg: rec.alg.name().to_owned(),
            n: s.n(),
            l: s.l,
            m: s.m,
            p_or_g: p_or_g(s),
            lambda: if learned {
                arch.map(|a| a.lambda)
            } else if rec.alg.uses_lambda_grid() {
                Some(rec.lambda_mult)
            } else {
                None
            },
            k_max: if learned { None } else { Some(cfg.solver.k_max) },
            u: if learned { arch.map(|a| a.u) } else { None },
            v: if learned { arch.map(|a| a.v) } else { None },
            mse,
            wall_time_s,
            seed: cfg.seeds.data,
        }
    }
}

/// MSE of every configured algorithm at every grid point, with λ tuned per
/// (algorithm, grid point) on the validation set. Each row is handed to
/// `sink` as soon as it is ready.
pub fn run_mse_sweep_with(
    cfg: &ExperimentConfig,
    sweep: &Sweep,
    exec: Execution,
    sink: &mut dyn FnMut(&ReportRow) -> Result<()>,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for scenario in sweep.scenarios(&cfg.scenario())? {
        let point = GridPoint::new(cfg, scenario)?;
        for &alg in &cfg.algorithms {
            let mut rec = point.recovery(cfg, alg);
            rec.lambda_mult = tune_lambda(&rec, &cfg.lambda_grid, &point.validation, exec)?;
            let ys = point.test.measure(rec.a)?;
            let start = Instant::now();
            let est = rec.run(&ys, exec)?;
            let elapsed = start.elapsed().as_secs_f64();
            let row = point.row(cfg, &rec, eval_mse(&point.test.xs, &est)?, elapsed);
            sink(&row)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// One test sample recovered by one algorithm, with λ tuned as in
/// [`run_mse_sweep`]. The row's MSE is that of the single sample.
pub fn solve_one(cfg: &ExperimentConfig, alg: Algorithm, index: usize, exec: Execution) -> Result<ReportRow> {
    let point = GridPoint::new(cfg, cfg.scenario())?;
    let mut rec = point.recovery(cfg, alg);
    rec.lambda_mult = tune_lambda(&rec, &cfg.lambda_grid, &point.validation, exec)?;
    let x = point
        .test
        .xs
        .get(index)
        .ok_or_else(|| Error::config("index", format!("must be below T = {}", cfg.t)))?;
    let y = [rec.a.matmul(x)?.add(&point.test.zs[index])?];
    let start = Instant::now();
    let est = rec.run(&y, Execution::Sequential)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(point.row(cfg, &rec, eval_mse(std::slice::from_ref(x), &est)?, elapsed))
}

pub fn run_mse_sweep(cfg: &ExperimentConfig, sweep: &Sweep, exec: Execution) -> Result<Vec<ReportRow>> {
    run_mse_sweep_with(cfg, sweep, exec, &mut |_| Ok(()))
}

/// Median wall time of recovering the whole test set, per algorithm and grid
/// point. Runs single-flight: one warm-up pass, then `sweep.timing_reps`
/// timed passes, all sequential.
pub fn run_timing_bench(cfg: &ExperimentConfig, sweep: &Sweep) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for scenario in sweep.scenarios(&cfg.scenario())? {
        let point = GridPoint::new(cfg, scenario)?;
        for &alg in &cfg.algorithms {
            let mut rec = point.recovery(cfg, alg);
            rec.lambda_mult = tune_lambda(&rec, &cfg.lambda_grid, &point.validation, Execution::Sequential)?;
            let ys = point.test.measure(rec.a)?;
            let est = rec.run(&ys, Execution::Sequential)?;
            let mse = eval_mse(&point.test.xs, &est)?;
            let mut times = Vec::with_capacity(cfg.sweep.timing_reps);
            for _ in 0..cfg.sweep.timing_reps {
                let start = Instant::now();
                std::hint::black_box(rec.run(&ys, Execution::Sequential)?);
                times.push(start.elapsed().as_secs_f64());
            }
            rows.push(point.row(cfg, &rec, mse, median(&mut times)));
        }
    }
    Ok(rows)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Output of [`run_convergence_study`].
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// MSE after every iteration `k = 1..=k_max`, per algorithm.
    pub curves: Vec<CurveRow>,
    /// One row per algorithm; `wall_time_s` is the mean time of one iteration.
    pub rows: Vec<ReportRow>,
    pub lambda_mult: f64,
}

impl ConvergenceStudy {
    pub fn curve(&self, alg: Algorithm) -> Vec<f64> {
        self.curves.iter().filter(|r| r.alg == alg.name()).map(|r| r.mse).collect()
    }

    pub fn per_iteration_time(&self, alg: Algorithm) -> Option<f64> {
        self.rows.iter().find(|r| r.alg == alg.name()).map(|r| r.wall_time_s)
    }
}

/// First iteration (1-based) from which the curve stays within `rel` of its
/// final value.
pub fn iterations_to_settle(curve: &[f64], rel: f64) -> Option<usize> {
    let last = *curve.last()?;
    let tol = rel * last.abs();
    let mut k = curve.len();
    while k > 0 && (curve[k - 1] - last).abs() <= tol {
        k -= 1;
    }
    Some(k + 1)
}

/// BCD-MMV and PCD-MMV run for exactly `k_max` iterations on the test set,
/// with the MSE recorded after every iteration and the mean per-iteration
/// time measured on a separate unobserved pass. λ is tuned for BCD and
/// shared. PCD runs with `pcd_execution`.
pub fn run_convergence_study(cfg: &ExperimentConfig, pcd_execution: Execution) -> Result<ConvergenceStudy> {
    let point = GridPoint::new(cfg, cfg.scenario())?;
    let s = &point.scenario;
    let bcd = point.recovery(cfg, Algorithm::Bcd);
    let lambda_mult = tune_lambda(&bcd, &cfg.lambda_grid, &point.validation, Execution::Sequential)?;
    let ys = point.test.measure(&point.pilots)?;
    let k_max = cfg.solver.k_max;
    let mut opts = SolverOptions::fixed_iterations(k_max);
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for alg in [Algorithm::Bcd, Algorithm::Pcd] {
        opts.execution = if alg == Algorithm::Pcd { pcd_execution } else { Execution::Sequential };
        let mut sq = vec![0.0; k_max];
        let mut final_est = Vec::with_capacity(ys.len());
        let mut time = 0.0;
        for (y, x) in ys.iter().zip(&point.test.xs) {
            let problem = GroupLassoProblem::new(point.pilots.clone(), y.clone(), lambda_mult * kkt_threshold(&point.pilots, y))?;
            let mut obs = |k: usize, est: &ComplexMatrix| {
                sq[k - 1] += est.sub(x).map(|d| d.frobenius_norm_sq()).unwrap_or(f64::NAN);
            };
            let res = match alg {
                Algorithm::Bcd => bcd_mmv_observed(&problem, &opts, &mut obs)?,
                _ => pcd_mmv_observed(&problem, &opts, &cfg.solver.schedule, &mut obs)?,
            };
            final_est.push(res.x_hat);
            let timed = match alg {
                Algorithm::Bcd => bcd_mmv(&problem, &opts)?,
                _ => pcd_mmv(&problem, &opts, &cfg.solver.schedule)?,
            };
            time += timed.wall_time_s / timed.iterations_run.max(1) as f64;
        }
        let denom = (s.n() * ys.len()) as f64;
        curves.extend(sq.iter().enumerate().map(|(k, v)| CurveRow {
            k: k + 1,
            alg: alg.name().to_owned(),
            mse: v / denom,
        }));
        let rec = Recovery { alg, lambda_mult, ..bcd };
        let mse = eval_mse(&point.test.xs, &final_est)?;
        rows.push(point.row(cfg, &rec, mse, time / ys.len() as f64));
    }
    Ok(ConvergenceStudy {
        curves,
        rows,
        lambda_mult,
    })
}

/// Freshly initialized network for the configured scenario. λ comes from
/// `net.lambda`, or from [`default_net_lambda`] under the initial encoder.
pub fn init_network(cfg: &ExperimentConfig) -> Result<NetworkParams> {
    let s = cfg.scenario();
    let mut params = NetworkParams::init(cfg.net.arch(&s, 0.0), cfg.seeds.init)?;
    params.arch.lambda = match cfg.net.lambda {
        Some(l) => l,
        None => default_net_lambda(&params.a, &SampleSet::validation(&s, &cfg.seeds, cfg.validation.max(1))?)?,
    };
    Ok(params)
}

/// Trains [`init_network`] on the configured scenario.
pub fn train_network(
    cfg: &ExperimentConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &NetworkParams) -> Result<()>,
) -> Result<TrainingOutcome> {
    train_observed(init_network(cfg)?, &cfg.scenario(), &cfg.train, on_epoch)
}

/// Writes the test set of the configured scenario as concatenated text
/// matrices: signals, noise, and the Gaussian pilots.
pub fn write_sample_set(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let s = cfg.scenario();
    let set = SampleSet::test(&s, &cfg.seeds, cfg.t)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("test_signals.txt"), ComplexMatrix::write_all(&set.xs))?;
    std::fs::write(dir.join("test_noise.txt"), ComplexMatrix::write_all(&set.zs))?;
    std::fs::write(dir.join("pilots.txt"), gaussian_pilots(&s, &cfg.seeds).to_text())?;
    Ok(())
}
