//! Monte-Carlo closed-loop experiments.
//!
//! Every run draws its own innovation gain, training batch and test noise
//! from seeds derived from `(cfg.seed, run)`. All schemes evaluated in one
//! call see the same plant, data and test noise for a given run, so their
//! index differences reflect the controllers only.

mod config;
mod grid;
mod report;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

pub use config::{ExperimentConfig, RhoChoice, SweepSpec};
pub use grid::parse_grid;
pub use report::{
    aggregate, write_runs_csv, write_summary_csv, write_sweep_csv, write_trajectories_csv, Aggregate, Baseline,
    SweepRow,
};

use crate::control::{ControlSpec, Controller, Measurement, SchemeConfig};
use crate::error::{DdpcError, Result};
use crate::horizon::select_rho;
use crate::linalg::build_hankel_set;
use crate::par;
use crate::plant::{benchmark_system, gaussian_noise, measure_snr, simulate_with_rng, LinearSystem, TrajectoryBatch};
use crate::predictor::{build_predictor, InitialCondition, PredictorData};
use crate::rng::{derive_seed, rng_from_seed, run_seed, Stream};

/// Closed-loop samples for `t = 0..T_v`, one column per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }

    pub fn label(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::Failed(m) => format!("failed: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopResult {
    pub run_id: usize,
    pub scheme_tag: String,
    pub run_seed: u64,
    /// `Σ ‖y(t) - y_r‖²_Q + ‖u(t) - u_r‖²_R`; NaN for failed runs.
    pub j_index: f64,
    /// `Σ ‖u(t)‖²`; NaN for failed runs.
    pub j_u_index: f64,
    pub trajectory: Trajectory,
    pub status: RunStatus,
    pub diagnostics: BTreeMap<String, f64>,
}

/// `(J, J_u)` of a trajectory.
pub fn performance_indexes(spec: &ControlSpec, traj: &Trajectory) -> (f64, f64) {
    let mut j = 0.0;
    let mut ju = 0.0;
    for t in 0..traj.len() {
        let u = traj.u.column(t);
        let du = u - &spec.u_ref;
        let dy = traj.y.column(t) - &spec.y_ref;
        j += dy.dot(&(&spec.q_weight * &dy)) + du.dot(&(&spec.r_weight * &du));
        ju += u.norm_squared();
    }
    (j, ju)
}

/// Everything a run needs before any controller is built.
#[derive(Debug, Clone)]
pub struct RunData {
    pub run_id: usize,
    pub seed: u64,
    pub sys: LinearSystem,
    pub innovation_std: f64,
    pub training: TrajectoryBatch,
    /// `p × T_v` innovations applied during the closed-loop test.
    pub test_noise: DMatrix<f64>,
}

impl RunData {
    pub fn prepare(cfg: &ExperimentConfig, run_id: usize) -> Result<Self> {
        let r = run_id as u64;
        let sys = benchmark_system(derive_seed(cfg.seed, r, Stream::Gain))?;
        let exc = cfg.excitation();
        let innovation_std = if cfg.snr_target_db.is_infinite() && cfg.snr_target_db > 0.0 {
            0.0
        } else {
            sys.innovation_std_for_snr(exc.variance(), cfg.snr_target_db)?
        };
        let u = exc.sample(sys.m_inputs(), cfg.n_data, &mut rng_from_seed(derive_seed(cfg.seed, r, Stream::TrainingInput)));
        let mut noise_rng = rng_from_seed(derive_seed(cfg.seed, r, Stream::TrainingNoise));
        let training = simulate_with_rng(&sys, &DVector::zeros(sys.n_states()), &u, innovation_std, &mut noise_rng)?;
        let mut test_rng = rng_from_seed(derive_seed(cfg.seed, r, Stream::TestNoise));
        let test_noise = gaussian_noise(sys.p_outputs(), cfg.test_length, innovation_std, &mut test_rng);
        Ok(Self {
            run_id,
            seed: run_seed(cfg.seed, r),
            sys,
            innovation_std,
            training,
            test_noise,
        })
    }

    /// Past horizon for this run.
    pub fn rho(&self, cfg: &ExperimentConfig) -> Result<usize> {
        match cfg.rho {
            RhoChoice::Fixed(r) => Ok(r),
            RhoChoice::Auto => {
                // Leave room for a Hankel matrix with more columns than rows.
                let cap = cfg.n_data.saturating_sub(cfg.horizon) / 4;
                let hi = cfg.rho_range.1.min(cap.max(cfg.rho_range.0));
                Ok(select_rho(&self.training, cfg.rho_range.0, hi)?.chosen_rho)
            }
        }
    }

    pub fn predictor(&self, rho: usize, horizon: usize) -> Result<PredictorData> {
        build_predictor(build_hankel_set(&self.training, rho, horizon)?)
    }
}

/// Runs one closed loop of `cfg.test_length` steps.
///
/// The plant starts at `A^{-ρ} x0` and runs `ρ` noise-free zero-input steps
/// to fill the first past window, so that `x(0) = x0` for every scheme. The
/// oracle's innovation observer starts from the true state.
pub fn closed_loop(
    cfg: &ExperimentConfig,
    run: &RunData,
    ctrl: &mut Controller<'_>,
) -> Result<(Trajectory, BTreeMap<String, f64>)> {
    let sys = &run.sys;
    let (n, m, p) = (sys.n_states(), sys.m_inputs(), sys.p_outputs());
    if cfg.x0.len() != n {
        return Err(DdpcError::Config {
            key: "x0".into(),
            message: format!("{} entries for a plant with {n} states", cfg.x0.len()),
        });
    }
    let rho = ctrl.spec().rho;
    let tv = cfg.test_length;
    let a_lu = sys.a.clone().lu();
    let mut x = DVector::from_vec(cfg.x0.clone());
    for _ in 0..rho {
        x = a_lu.solve(&x).ok_or(DdpcError::Singular { block: "A" })?;
    }
    let mut u_hist = DMatrix::zeros(m, rho + tv);
    let mut y_hist = DMatrix::zeros(p, rho + tv);
    for k in 0..rho {
        y_hist.set_column(k, &(&sys.c * &x));
        x = &sys.a * &x;
    }
    let mut x_hat = x.clone();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut max_dual: f64 = 0.0;
    for t in 0..tv {
        let k = rho + t;
        let step = if ctrl.scheme().is_data_driven() {
            let init = InitialCondition::from_window(
                &u_hist.columns(k - rho, rho).into_owned(),
                &y_hist.columns(k - rho, rho).into_owned(),
            )?;
            ctrl.step(Measurement::Window(&init))?
        } else {
            ctrl.step(Measurement::State(&x_hat))?
        };
        let u = step.u_first;
        let e = run.test_noise.column(t).into_owned();
        let (y, x_next) = sys.step(&x, &u, &e);
        let innov = &y - &sys.c * &x_hat - &sys.d * &u;
        x_hat = &sys.a * &x_hat + &sys.b * &u + &sys.k * innov;
        u_hist.set_column(k, &u);
        y_hist.set_column(k, &y);
        x = x_next;
        *sums.entry("iterations".into()).or_default() += step.solver.iterations as f64;
        for (key, v) in &step.extras {
            *sums.entry(key.clone()).or_default() += v;
        }
        max_dual = max_dual.max(step.solver.dual_residual);
    }
    let mut diag: BTreeMap<String, f64> = sums.into_iter().map(|(k, v)| (format!("mean_{k}"), v / tv as f64)).collect();
    diag.insert("max_dual_residual".into(), max_dual);
    diag.insert("n_variables".into(), ctrl.n_decision() as f64);
    diag.insert("rho".into(), rho as f64);
    let traj = Trajectory {
        u: u_hist.columns(rho, tv).into_owned(),
        y: y_hist.columns(rho, tv).into_owned(),
    };
    Ok((traj, diag))
}

fn failed(run_id: usize, seed: u64, scheme: &SchemeConfig, msg: String) -> ClosedLoopResult {
    ClosedLoopResult {
        run_id,
        scheme_tag: scheme.to_string(),
        run_seed: seed,
        j_index: f64::NAN,
        j_u_index: f64::NAN,
        trajectory: Trajectory {
            u: DMatrix::zeros(0, 0),
            y: DMatrix::zeros(0, 0),
        },
        status: RunStatus::Failed(msg),
        diagnostics: BTreeMap::new(),
    }
}

/// All schemes on one Monte-Carlo run; the predictor is built once.
fn run_one(cfg: &ExperimentConfig, run_id: usize, schemes: &[SchemeConfig]) -> Vec<ClosedLoopResult> {
    let seed = run_seed(cfg.seed, run_id as u64);
    let all_failed = |msg: String| schemes.iter().map(|s| failed(run_id, seed, s, msg.clone())).collect();
    let run = match RunData::prepare(cfg, run_id) {
        Ok(r) => r,
        Err(e) => return all_failed(e.to_string()),
    };
    let rho = match run.rho(cfg) {
        Ok(r) => r,
        Err(e) => return all_failed(e.to_string()),
    };
    let spec = match cfg.control_spec(rho) {
        Ok(s) => s,
        Err(e) => return all_failed(e.to_string()),
    };
    let pd = if schemes.iter().any(|s| s.is_data_driven()) {
        match run.predictor(rho, cfg.horizon) {
            Ok(pd) => Some(pd),
            Err(e) => return all_failed(e.to_string()),
        }
    } else {
        None
    };
    let training_snr = measure_snr(&run.training, &run.sys, &DVector::zeros(run.sys.n_states())).unwrap_or(f64::NAN);
    schemes
        .iter()
        .map(|scheme| {
            let outcome = (|| {
                let mut ctrl = match pd.as_ref() {
                    Some(pd) if scheme.is_data_driven() => Controller::data_driven(pd, &spec, *scheme)?,
                    _ => Controller::oracle(&run.sys, &spec)?,
                };
                closed_loop(cfg, &run, &mut ctrl)
            })();
            match outcome {
                Ok((trajectory, mut diagnostics)) => {
                    let (j_index, j_u_index) = performance_indexes(&spec, &trajectory);
                    diagnostics.insert("innovation_std".into(), run.innovation_std);
                    diagnostics.insert("training_snr_db".into(), training_snr);
                    ClosedLoopResult {
                        run_id,
                        scheme_tag: scheme.to_string(),
                        run_seed: seed,
                        j_index,
                        j_u_index,
                        trajectory,
                        status: RunStatus::Ok,
                        diagnostics,
                    }
                }
                Err(e) => failed(run_id, seed, scheme, e.to_string()),
            }
        })
        .collect()
}

/// Runs every scheme on every Monte-Carlo run; result `[s][r]` is scheme
/// `s` on run `r`. Runs execute according to `cfg.execution`.
pub fn run_schemes(cfg: &ExperimentConfig, schemes: &[SchemeConfig]) -> Result<Vec<Vec<ClosedLoopResult>>> {
    cfg.validate()?;
    for s in schemes {
        s.validate()?;
    }
    let runs: Vec<usize> = (0..cfg.n_monte_carlo).collect();
    let per_run = par::map_with(cfg.execution, &runs, |&r| run_one(cfg, r, schemes));
    let mut out: Vec<Vec<ClosedLoopResult>> = schemes.iter().map(|_| Vec::with_capacity(runs.len())).collect();
    for row in per_run {
        for (s, res) in row.into_iter().enumerate() {
            out[s].push(res);
        }
    }
    Ok(out)
}

/// The configured scheme over all Monte-Carlo runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ClosedLoopResult>> {
    Ok(run_schemes(cfg, &[cfg.scheme])?.remove(0))
}

/// Noisy-oracle closed loops for the same runs.
pub fn oracle_baseline(cfg: &ExperimentConfig) -> Result<Baseline> {
    Baseline::from_results(&run_schemes(cfg, &[SchemeConfig::OracleMpc])?[0])
}

/// Sweeps `cfg.sweep` over its grid with `cfg.scheme`, aggregating the
/// index differences against the noisy-oracle baseline.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| DdpcError::Config {
        key: "sweep".into(),
        message: "no sweep configured".into(),
    })?;
    cfg.validate()?;
    let values = sweep.resolved_values()?;
    let shared = if ExperimentConfig::param_keeps_oracle(&sweep.param) {
        Some(oracle_baseline(cfg)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(values.len());
    for v in values {
        let point = cfg.with_param(&sweep.param, v)?;
        let (results, baseline) = match &shared {
            Some(b) => (run_experiment(&point)?, b.clone()),
            None => {
                let mut both = run_schemes(&point, &[point.scheme, SchemeConfig::OracleMpc])?;
                let oracle = both.pop().expect("two schemes");
                (both.pop().expect("two schemes"), Baseline::from_results(&oracle)?)
            }
        };
        rows.push(SweepRow {
            param: sweep.param.clone(),
            value: v,
            summary: aggregate(&point.scheme.to_string(), &results, &baseline),
        });
    }
    Ok(rows)
}

/// Default weight grid for a scheme given without weights in a comparison.
pub fn default_tuning_grid(scheme: &SchemeConfig) -> Vec<SchemeConfig> {
    let axis = [1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6];
    let names = scheme.param_names();
    let mut out = vec![*scheme];
    for name in names {
        out = out
            .iter()
            .flat_map(|s| axis.iter().map(move |&v| s.with_param(name, v).expect("grid values are valid")))
            .collect();
    }
    out
}

/// Mean/std index differences for several schemes against one shared
/// oracle baseline. Each entry is a list of tunings of the same scheme; the
/// tuning with the smallest mean `|J - J̄ᵒ|` is reported.
pub fn compare(cfg: &ExperimentConfig, schemes: &[Vec<SchemeConfig>]) -> Result<(Baseline, Vec<Aggregate>)> {
    let flat: Vec<SchemeConfig> = std::iter::once(SchemeConfig::OracleMpc)
        .chain(schemes.iter().flatten().copied())
        .collect();
    let mut results = run_schemes(cfg, &flat)?;
    let baseline = Baseline::from_results(&results.remove(0))?;
    let mut it = results.into_iter();
    let mut best = Vec::with_capacity(schemes.len());
    for tunings in schemes {
        let agg: Vec<Aggregate> = tunings
            .iter()
            .map(|s| aggregate(&s.to_string(), &it.next().expect("one result per tuning"), &baseline))
            .collect();
        let pick = agg
            .into_iter()
            .min_by(|a, b| a.mean_dj.total_cmp(&b.mean_dj))
            .ok_or_else(|| DdpcError::Invalid("scheme with no tunings".into()))?;
        best.push(pick);
    }
    Ok((baseline, best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_data: 300,
            n_monte_carlo: 3,
            test_length: 20,
            rho: RhoChoice::Fixed(6),
            horizon: 12,
            ..Default::default()
        }
    }

    #[test]
    fn indexes_recompute() {
        let cfg = small();
        for r in run_experiment(&cfg).unwrap() {
            assert!(r.status.is_ok(), "{:?}", r.status);
            let (j, ju) = performance_indexes(&cfg.control_spec(6).unwrap(), &r.trajectory);
            assert!((j - r.j_index).abs() <= 1e-9 * j.max(1.0));
            assert!((ju - r.j_u_index).abs() <= 1e-9 * ju.max(1.0));
            assert_eq!(r.trajectory.len(), 20);
        }
    }

    #[test]
    fn noise_free_loop_starts_at_x0() {
        let cfg = ExperimentConfig {
            snr_target_db: f64::INFINITY,
            n_monte_carlo: 1,
            ..small()
        };
        let r = &run_schemes(&cfg, &[SchemeConfig::OracleMpc]).unwrap()[0][0];
        // y(0) = C x0 with C = [0, 1.4142].
        assert!((r.trajectory.y[(0, 0)] - 1.4142).abs() < 1e-12);
    }

    #[test]
    fn sequential_matches_parallel() {
        let cfg = small();
        let seq = ExperimentConfig {
            execution: par::Execution::Sequential,
            ..cfg.clone()
        };
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&seq).unwrap());
    }

    #[test]
    fn failures_are_recorded() {
        // Too little data for the Hankel matrices.
        let cfg = ExperimentConfig { n_data: 20, ..small() };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.len(), 3);
        assert!(res.iter().all(|r| !r.status.is_ok() && r.j_index.is_nan()));
    }

    #[test]
    fn default_grid_covers_both_weights() {
        let g = default_tuning_grid(&SchemeConfig::parse_token("berberich").unwrap());
        assert_eq!(g.len(), 49);
        assert_eq!(default_tuning_grid(&SchemeConfig::GammaDdpc).len(), 1);
    }
}
