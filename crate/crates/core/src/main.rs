use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddpc::control::SchemeConfig;
use ddpc::harness::{
    aggregate, compare, default_tuning_grid, oracle_baseline, parse_grid, run_experiment, run_sweep,
    write_runs_csv, write_summary_csv, write_sweep_csv, write_trajectories_csv, ExperimentConfig, RunData,
    SweepSpec,
};
use ddpc::horizon::{select_rho, DEFAULT_RHO_RANGE};
use ddpc::plant::TrajectoryBatch;
use ddpc::{DdpcError, Result};

#[derive(Parser)]
#[command(name = "ddpc", version, about = "Data-driven predictive control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults reproduce the benchmark setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Run Monte-Carlo runs one after another.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.runs {
            cfg.n_monte_carlo = n;
        }
        if self.sequential {
            cfg.execution = ddpc::par::Execution::Sequential;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the training batch of one Monte-Carlo run as CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo run index.
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        n_data: Option<usize>,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score past horizons by FPE on a dataset.
    SelectRho {
        /// CSV written by `generate`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RHO_RANGE.0)]
        min: usize,
        #[arg(long, default_value_t = DEFAULT_RHO_RANGE.1)]
        max: usize,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop Monte-Carlo runs of one scheme plus the oracle baseline.
    Run {
        #[command(flatten)]
        common: Common,
        /// Scheme token such as `gamma_ddpc` or `spc_slack:1e4`.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter over a grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: Option<String>,
        /// Scheme weight or one of n_data, rho, snr_target_db, horizon.
        #[arg(long)]
        param: Option<String>,
        /// Values such as `1e-4:10:1e4` or `250,500,1000`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best-tuned index differences of several schemes against one oracle
    /// baseline. Schemes given without weights are tuned on a default grid.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scheme tokens.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DdpcError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| DdpcError::io(path, e))?))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DdpcError::io(dir, e))
}

fn file_tag(scheme: &SchemeConfig) -> String {
    scheme.to_string().replace(':', "_")
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            common,
            run,
            n_data,
            snr_db,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = n_data {
                cfg.n_data = n;
            }
            if let Some(s) = snr_db {
                cfg.snr_target_db = s;
            }
            cfg.validate()?;
            let data = RunData::prepare(&cfg, run)?;
            data.training.write_csv(create(&out)?)?;
            eprintln!(
                "wrote {} samples (innovation std {:.4e}) to {}",
                data.training.len(),
                data.innovation_std,
                out.display()
            );
        }
        Command::SelectRho { data, min, max, out } => {
            let file = File::open(&data).map_err(|e| DdpcError::io(&data, e))?;
            let batch = TrajectoryBatch::read_csv(file)?;
            let search = select_rho(&batch, min, max)?;
            match out {
                Some(p) => search.write_csv(create(&p)?)?,
                None => search.write_csv(io::stdout().lock())?,
            }
            eprintln!("chosen rho = {}", search.chosen_rho);
        }
        Command::Run { common, scheme, out } => {
            let mut cfg = common.load()?;
            if let Some(s) = scheme {
                cfg.scheme = SchemeConfig::parse_token(&s)?;
            }
            out_dir(&out)?;
            let baseline = oracle_baseline(&cfg)?;
            let results = run_experiment(&cfg)?;
            let tag = file_tag(&cfg.scheme);
            write_runs_csv(create(&out.join(format!("run_{tag}.csv")))?, &results)?;
            write_trajectories_csv(create(&out.join(format!("run_{tag}_trajectories.csv")))?, &results)?;
            let summary = aggregate(&cfg.scheme.to_string(), &results, &baseline);
            write_summary_csv(create(&out.join("summary.csv"))?, std::slice::from_ref(&summary))?;
            eprintln!(
                "{}: {} runs, {} failed, mean J {:.4e} (oracle {:.4e})",
                summary.scheme, summary.n_runs, summary.n_failed, summary.mean_j, baseline.j_mean
            );
        }
        Command::Sweep {
            common,
            scheme,
            param,
            grid,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = scheme {
                cfg.scheme = SchemeConfig::parse_token(&s)?;
            }
            match (param, grid) {
                (Some(param), Some(grid)) => {
                    cfg.sweep = Some(SweepSpec {
                        param,
                        values: parse_grid(&grid)?,
                        grid: None,
                    })
                }
                (None, None) => {}
                _ => {
                    return Err(DdpcError::Config {
                        key: "sweep".into(),
                        message: "--param and --grid go together".into(),
                    })
                }
            }
            cfg.validate()?;
            let rows = run_sweep(&cfg)?;
            out_dir(&out)?;
            let param = &cfg.sweep.as_ref().expect("checked by run_sweep").param;
            let path = out.join(format!("sweep_{param}.csv"));
            write_sweep_csv(create(&path)?, &rows)?;
            eprintln!("wrote {} grid points to {}", rows.len(), path.display());
        }
        Command::Compare { common, schemes, out } => {
            let cfg = common.load()?;
            if schemes.is_empty() {
                return Err(DdpcError::Config {
                    key: "schemes".into(),
                    message: "give at least one scheme".into(),
                });
            }
            let tunings = schemes
                .iter()
                .map(|tok| {
                    let s = SchemeConfig::parse_token(tok)?;
                    Ok(if tok.contains(':') { vec![s] } else { default_tuning_grid(&s) })
                })
                .collect::<Result<Vec<_>>>()?;
            let (baseline, rows) = compare(&cfg, &tunings)?;
            out_dir(&out)?;
            write_summary_csv(create(&out.join("compare.csv"))?, &rows)?;
            let mut so = io::stdout().lock();
            let w = |e: io::Error| DdpcError::io("<stdout>", e);
            writeln!(so, "oracle: mean J {:.4e}, mean J_u {:.4e}", baseline.j_mean, baseline.j_u_mean).map_err(w)?;
            for r in &rows {
                writeln!(
                    so,
                    "{:<32} |J-Jo| {:.4e} ± {:.4e}   |Ju-Juo| {:.4e} ± {:.4e}   failed {}",
                    r.scheme, r.mean_dj, r.std_dj, r.mean_dj_u, r.std_dj_u, r.n_failed
                )
                .map_err(w)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
