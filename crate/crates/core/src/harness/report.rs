//! Aggregation against the oracle baseline and CSV output.

use std::io::Write;

use super::ClosedLoopResult;
use crate::error::{DdpcError, Result};

/// Average noisy-oracle indexes over the Monte-Carlo runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub j_mean: f64,
    pub j_u_mean: f64,
    pub per_run: Vec<(f64, f64)>,
}

impl Baseline {
    pub fn from_results(oracle: &[ClosedLoopResult]) -> Result<Self> {
        if let Some(r) = oracle.iter().find(|r| !r.status.is_ok()) {
            return Err(DdpcError::Invalid(format!(
                "oracle baseline failed on run {}: {}",
                r.run_id,
                r.status.label()
            )));
        }
        let per_run: Vec<(f64, f64)> = oracle.iter().map(|r| (r.j_index, r.j_u_index)).collect();
        let (j, ju): (Vec<f64>, Vec<f64>) = per_run.iter().copied().unzip();
        Ok(Self {
            j_mean: mean_std(&j).0,
            j_u_mean: mean_std(&ju).0,
            per_run,
        })
    }
}

/// Mean and sample standard deviation; NaN for an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Statistics of one scheme over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub scheme: String,
    pub n_runs: usize,
    pub n_failed: usize,
    pub mean_j: f64,
    pub std_j: f64,
    pub mean_j_u: f64,
    pub std_j_u: f64,
    /// Of `|J - J̄ᵒ|`.
    pub mean_dj: f64,
    pub std_dj: f64,
    /// Of `|J_u - J̄_uᵒ|`.
    pub mean_dj_u: f64,
    pub std_dj_u: f64,
}

pub fn aggregate(scheme: &str, results: &[ClosedLoopResult], baseline: &Baseline) -> Aggregate {
    let ok: Vec<&ClosedLoopResult> = results.iter().filter(|r| r.status.is_ok()).collect();
    let col = |f: &dyn Fn(&ClosedLoopResult) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let (mean_j, std_j) = mean_std(&col(&|r| r.j_index));
    let (mean_j_u, std_j_u) = mean_std(&col(&|r| r.j_u_index));
    let (mean_dj, std_dj) = mean_std(&col(&|r| (r.j_index - baseline.j_mean).abs()));
    let (mean_dj_u, std_dj_u) = mean_std(&col(&|r| (r.j_u_index - baseline.j_u_mean).abs()));
    Aggregate {
        scheme: scheme.to_string(),
        n_runs: results.len(),
        n_failed: results.len() - ok.len(),
        mean_j,
        std_j,
        mean_j_u,
        std_j_u,
        mean_dj,
        std_dj,
        mean_dj_u,
        std_dj_u,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub summary: Aggregate,
}

fn flush<W: Write>(wr: csv::Writer<W>) -> Result<()> {
    wr.into_inner()
        .map_err(|e| DdpcError::io("<csv>", std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| DdpcError::io("<csv>", e))
}

/// `run_id,scheme,J,J_u,status`.
pub fn write_runs_csv<W: Write>(w: W, results: &[ClosedLoopResult]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["run_id", "scheme", "J", "J_u", "status"])?;
    for r in results {
        wr.write_record([
            r.run_id.to_string(),
            r.scheme_tag.clone(),
            r.j_index.to_string(),
            r.j_u_index.to_string(),
            r.status.label(),
        ])?;
    }
    flush(wr)
}

/// `run_id,t,u_0..,y_0..`; failed runs contribute no rows.
pub fn write_trajectories_csv<W: Write>(w: W, results: &[ClosedLoopResult]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let Some(first) = results.iter().find(|r| r.status.is_ok()) else {
        wr.write_record(["run_id", "t"])?;
        return flush(wr);
    };
    let (m, p) = (first.trajectory.u.nrows(), first.trajectory.y.nrows());
    let mut header = vec!["run_id".to_string(), "t".to_string()];
    header.extend((0..m).map(|i| format!("u_{i}")));
    header.extend((0..p).map(|i| format!("y_{i}")));
    wr.write_record(&header)?;
    for r in results.iter().filter(|r| r.status.is_ok()) {
        let tr = &r.trajectory;
        for t in 0..tr.len() {
            let mut rec = vec![r.run_id.to_string(), t.to_string()];
            rec.extend(tr.u.column(t).iter().map(|v| v.to_string()));
            rec.extend(tr.y.column(t).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
    }
    flush(wr)
}

/// `param,value,mean_dJ,std_dJ,mean_dJu,std_dJu`.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["param", "value", "mean_dJ", "std_dJ", "mean_dJu", "std_dJu"])?;
    for r in rows {
        let s = &r.summary;
        wr.write_record([
            r.param.clone(),
            r.value.to_string(),
            s.mean_dj.to_string(),
            s.std_dj.to_string(),
            s.mean_dj_u.to_string(),
            s.std_dj_u.to_string(),
        ])?;
    }
    flush(wr)
}

/// One row per scheme with absolute indexes and differences to the baseline.
pub fn write_summary_csv<W: Write>(w: W, rows: &[Aggregate]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "scheme", "n_runs", "n_failed", "mean_J", "std_J", "mean_J_u", "std_J_u", "mean_dJ", "std_dJ", "mean_dJu",
        "std_dJu",
    ])?;
    for s in rows {
        wr.write_record([
            s.scheme.clone(),
            s.n_runs.to_string(),
            s.n_failed.to_string(),
            s.mean_j.to_string(),
            s.std_j.to_string(),
            s.mean_j_u.to_string(),
            s.std_j_u.to_string(),
            s.mean_dj.to_string(),
            s.std_dj.to_string(),
            s.mean_dj_u.to_string(),
            s.std_dj_u.to_string(),
        ])?;
    }
    flush(wr)
}
