//! Command-line surface of the `mmv` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    run_convergence_study, run_mse_sweep_with, run_timing_bench, save_curves, save_report, save_training_curve,
    train_network, write_sample_set, Algorithm, ExperimentConfig, ReportWriter, Sweep,
};
use crate::parallel::{init_threads, Execution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmv", version, about = "Jointly sparse MMV recovery experiments")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the test signals, noise and Gaussian pilots as text matrices.
    Gen(Common),
    /// Recover one test sample with one algorithm.
    Solve {
        #[command(flatten)]
        common: Common,
        /// BCD, PCD, AMP, LEARNED, GROUP_LASSO_DL or AMP_DL (any case).
        #[arg(long, value_parser = parse_alg)]
        alg: Algorithm,
        /// Test sample index.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Train the auto-encoder and save params.json and the training curve.
    Train(Common),
    /// MSE of every configured algorithm on the test set.
    Eval(Common),
    /// Convergence, sweep and timing studies.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        study: Study,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Study {
    Convergence,
    RatioSweep,
    PSweep,
    Timing,
}

fn parse_alg(s: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| format!("unknown algorithm {s:?}"))
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::Json(_) => EXIT_CONFIG,
        Error::Numeric { .. } | Error::Shape { .. } | Error::MissingTrace(_) => EXIT_NUMERIC,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let exec = match cli.threads {
        Some(0) => return Err(Error::config("--threads", "must be at least 1")),
        Some(1) => Execution::Sequential,
        Some(n) => {
            init_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    match cli.command {
        Command::Gen(c) => {
            let (cfg, out) = prepare(&c)?;
            write_sample_set(&cfg, &out)?;
            println!("wrote {} test samples to {}", cfg.t, out.display());
        }
        Command::Solve { common, alg, index } => {
            let (mut cfg, out) = prepare(&common)?;
            if index >= cfg.t {
                return Err(Error::config("--index", format!("must be below T = {}", cfg.t)));
            }
            cfg.algorithms = vec![alg];
            let row = crate::experiments::solve_one(&cfg, alg, index, exec)?;
            let path = out.join(format!("solve_{}_{index}.csv", alg.name().to_lowercase()));
            save_report(&path, std::slice::from_ref(&row))?;
            println!("{} mse {:.6e} -> {}", row.alg, row.mse, path.display());
        }
        Command::Train(c) => {
            let (cfg, out) = prepare(&c)?;
            let every = cfg.train.checkpoint_every;
            let mut on_epoch = |rec: &crate::training::EpochRecord, p: &crate::net::NetworkParams| -> Result<()> {
                eprintln!(
                    "epoch {} train_loss {:.6e} eval_mse {} ({:.1}s)",
                    rec.epoch,
                    rec.train_loss,
                    rec.eval_mse.map_or("-".to_owned(), |v| format!("{v:.6e}")),
                    rec.wall_time_s
                );
                if every > 0 && rec.epoch.is_multiple_of(every) {
                    std::fs::write(out.join(format!("checkpoint_epoch{}.json", rec.epoch)), p.to_json()?)?;
                }
                Ok(())
            };
            let outcome = train_network(&cfg, &mut on_epoch)?;
            std::fs::write(out.join("params.json"), outcome.params.to_json()?)?;
            save_training_curve(&out.join("training_curve.csv"), &outcome.curve)?;
            println!("wrote {}", out.join("params.json").display());
        }
        Command::Eval(c) => {
            let (cfg, out) = prepare(&c)?;
            sweep_to_file(&cfg, &Sweep::Single, exec, &out.join("report.csv"))?;
        }
        Command::Bench { common, study } => {
            let (cfg, out) = prepare(&common)?;
            match study {
                Study::Convergence => {
                    let st = run_convergence_study(&cfg, exec)?;
                    save_report(&out.join("convergence_report.csv"), &st.rows)?;
                    save_curves(&out.join("convergence_curves.csv"), &st.curves)?;
                    print_rows(&st.rows);
                }
                Study::RatioSweep => {
                    let sweep = Sweep::Ratios(cfg.sweep.ratios.clone());
                    sweep_to_file(&cfg, &sweep, exec, &out.join("ratio_sweep.csv"))?;
                }
                Study::PSweep => {
                    let sweep = Sweep::Probabilities(cfg.sweep.probabilities.clone());
                    sweep_to_file(&cfg, &sweep, exec, &out.join("p_sweep.csv"))?;
                }
                Study::Timing => {
                    let rows = run_timing_bench(&cfg, &Sweep::Ratios(cfg.sweep.ratios.clone()))?;
                    save_report(&out.join("timing.csv"), &rows)?;
                    print_rows(&rows);
                }
            }
        }
    }
    Ok(())
}

fn prepare(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn sweep_to_file(cfg: &ExperimentConfig, sweep: &Sweep, exec: Execution, path: &Path) -> Result<()> {
    let mut w = ReportWriter::create(path)?;
    let rows = run_mse_sweep_with(cfg, sweep, exec, &mut |row| w.push(row))?;
    print_rows(&rows);
    Ok(())
}

fn print_rows(rows: &[crate::experiments::ReportRow]) {
    for r in rows {
        println!("{} {} mse {:.6e} time {:.4e}s", r.scenario_id, r.alg, r.mse, r.wall_time_s);
    }
}
