//! Past-horizon selection by Akaike's Final Prediction Error.
//!
//! Each candidate `ρ` is scored with a least-squares one-step ARX predictor of
//! `y(t)` from `u(t-ρ..t-1)`, `y(t-ρ..t-1)` and `u(t)`. All candidates are fit
//! on the same rows (`t ≥ rho_max`) so their residual variances compare.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{DdpcError, Result};
use crate::par;
use crate::plant::TrajectoryBatch;

pub const DEFAULT_RHO_RANGE: (usize, usize) = (2, 40);

/// Relative floor on the residual variance, so that exact (noise-free) fits
/// tie and the tie-break toward small `ρ` applies.
const VARIANCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSearch {
    pub rho_min: usize,
    pub rho_max: usize,
    pub scores: BTreeMap<usize, f64>,
    pub chosen_rho: usize,
}

impl HorizonSearch {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["rho", "fpe"])?;
        for (rho, fpe) in &self.scores {
            wr.write_record([rho.to_string(), fpe.to_string()])?;
        }
        wr.flush().map_err(|e| DdpcError::io("<csv>", e))?;
        Ok(())
    }
}

fn fpe_score(batch: &TrajectoryBatch, rho: usize, start: usize, floor: f64) -> f64 {
    let (m, p) = (batch.m_inputs(), batch.p_outputs());
    let rows = batch.len() - start;
    let d = (m + p) * rho + m;
    let mut phi = DMatrix::zeros(rows, d);
    let mut target = DMatrix::zeros(rows, p);
    for (r, t) in (start..batch.len()).enumerate() {
        let mut c = 0;
        for lag in (1..=rho).rev() {
            for i in 0..m {
                phi[(r, c)] = batch.u[(i, t - lag)];
                c += 1;
            }
        }
        for lag in (1..=rho).rev() {
            for i in 0..p {
                phi[(r, c)] = batch.y[(i, t - lag)];
                c += 1;
            }
        }
        for i in 0..m {
            phi[(r, c)] = batch.u[(i, t)];
            c += 1;
        }
        for i in 0..p {
            target[(r, i)] = batch.y[(i, t)];
        }
    }
    let theta = crate::linalg::pinv(&phi) * &target;
    let resid = &target - &phi * theta;
    let v = (resid.norm_squared() / (rows * p) as f64).max(floor);
    let ratio = d as f64 / rows as f64;
    v * (1.0 + ratio) / (1.0 - ratio)
}

/// Scores every `ρ` in `[rho_min, rho_max]` and returns the FPE minimiser,
/// ties resolved toward the smaller `ρ`.
pub fn select_rho(batch: &TrajectoryBatch, rho_min: usize, rho_max: usize) -> Result<HorizonSearch> {
    if rho_min == 0 || rho_min > rho_max {
        return Err(DdpcError::Invalid(format!(
            "invalid rho range [{rho_min}, {rho_max}]"
        )));
    }
    let (m, p) = (batch.m_inputs(), batch.p_outputs());
    let required = rho_max + 10 * (m + p) * rho_max;
    if batch.len() < required {
        return Err(DdpcError::InsufficientData {
            required,
            available: batch.len(),
        });
    }
    let mean_sq = batch.y.norm_squared() / batch.y.len() as f64;
    let floor = VARIANCE_FLOOR * mean_sq.max(f64::MIN_POSITIVE);
    let candidates: Vec<usize> = (rho_min..=rho_max).collect();
    let fpe = par::map(&candidates, |&rho| fpe_score(batch, rho, rho_max, floor));
    let scores: BTreeMap<usize, f64> = candidates.into_iter().zip(fpe).collect();
    let chosen_rho = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, (&rho, &s)| match best {
            Some((_, bs)) if bs <= s => best,
            _ => Some((rho, s)),
        })
        .map(|(rho, _)| rho)
        .expect("non-empty candidate range");
    Ok(HorizonSearch {
        rho_min,
        rho_max,
        scores,
        chosen_rho,
    })
}
