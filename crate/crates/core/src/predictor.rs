//! Data-driven output predictors shared by every scheme.
//!
//! With `[Z_P; U_F; Y_F] = L Q`, a pair `(z_init, u_f)` maps to
//!
//! ```text
//! γ1 = L11⁻¹ z_init
//! γ2 = L22⁻¹ (u_f - L21 γ1)
//! ŷ  = L31 γ1 + L32 γ2
//! α* = Q1ᵀ γ1 + Q2ᵀ γ2
//! ```
//!
//! Noise-free data makes `Z_P` rank deficient (rank `n + mρ`). In that case
//! `L11⁻¹` is replaced by its pseudo-inverse and `z_init` must lie in the
//! range of `Z_P`; predictions remain unique because the rows of `Ŷ_F` lie in
//! the row span of `[Z_P; U_F]`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{DdpcError, Result};
use crate::linalg::{self, row_span_basis, HankelSet, LqFactors, RankReport};
use crate::plant::TrajectoryBatch;

/// Relative agreement required between the projection and LQ paths for `Ŷ_F`.
const DUAL_PATH_TOL: f64 = 1e-9;
/// Relative residual allowed for `L11 γ1 = z_init`.
const GAMMA1_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct PredictorData {
    pub hankel: HankelSet,
    pub lq: LqFactors,
    /// `Ŷ_F = L31 Q1 + L32 Q2`, the projection of `Y_F` onto `[Z_P; U_F]`.
    pub y_hat_f: DMatrix<f64>,
    pub ranks: RankReport,
    w_pinv: DMatrix<f64>,
    l11_inv: DMatrix<f64>,
    l11_full: bool,
    pi: OnceLock<DMatrix<f64>>,
}

impl PredictorData {
    pub fn rho(&self) -> usize {
        self.hankel.rho
    }

    pub fn horizon(&self) -> usize {
        self.hankel.horizon
    }

    pub fn n_cols(&self) -> usize {
        self.hankel.n_cols
    }

    pub fn m_inputs(&self) -> usize {
        self.hankel.m_inputs
    }

    pub fn p_outputs(&self) -> usize {
        self.hankel.p_outputs
    }

    /// True when `Z_P` has full row rank and `L11` is inverted exactly.
    pub fn past_full_rank(&self) -> bool {
        self.l11_full
    }

    /// `L11⁻¹`, or its pseudo-inverse for deterministic data.
    pub fn l11_inverse(&self) -> &DMatrix<f64> {
        &self.l11_inv
    }

    /// Pseudo-inverse of `[Z_P; U_F]` (`N × (M1 + M2)`).
    pub fn data_pinv(&self) -> &DMatrix<f64> {
        &self.w_pinv
    }

    /// The orthogonal projector `Π = [Z_P; U_F]† [Z_P; U_F]` onto the row
    /// span of the past/input data, formed on first use as `V Vᵀ` from an
    /// orthonormal basis so that `I - Π` stays accurate under large weights.
    pub fn pi(&self) -> &DMatrix<f64> {
        self.pi.get_or_init(|| {
            let v = row_span_basis(&self.hankel.past_and_inputs());
            &v * v.transpose()
        })
    }

    /// Linear SPC predictor `ŷ = Kz z_init + Ku u_f` with
    /// `[Kz Ku] = Ŷ_F [Z_P; U_F]† = Y_F [Z_P; U_F]†`.
    pub fn spc_gains(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m1, m2, _) = self.hankel.block_sizes();
        let k = &self.hankel.y_future * &self.w_pinv;
        (k.columns(0, m1).into_owned(), k.columns(m1, m2).into_owned())
    }

    /// Runs the full decomposition for one `(z_init, u_f)` pair.
    pub fn decompose(
        &self,
        init: &InitialCondition,
        u_f: &DVector<f64>,
        materialize_alpha: bool,
    ) -> Result<GammaSolution> {
        let gamma1 = solve_gamma1(self, init)?;
        let gamma2 = gamma2_for_input(self, &gamma1, u_f)?;
        let alpha_star = materialize_alpha.then(|| self.alpha(&gamma1, &gamma2));
        Ok(GammaSolution {
            gamma1,
            gamma2,
            alpha_star,
        })
    }

    /// `Q1ᵀ γ1 + Q2ᵀ γ2`
    pub fn alpha(&self, gamma1: &DVector<f64>, gamma2: &DVector<f64>) -> DVector<f64> {
        self.lq.q1.tr_mul(gamma1) + self.lq.q2.tr_mul(gamma2)
    }
}

/// Past window `[z(t-ρ); …; z(t-1)]` with `z(k) = [u(k); y(k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub z_init: DVector<f64>,
}

impl InitialCondition {
    pub fn new(z_init: DVector<f64>) -> Self {
        Self { z_init }
    }

    /// Interleaves `u_past` (`m × ρ`) and `y_past` (`p × ρ`), oldest first.
    pub fn from_window(u_past: &DMatrix<f64>, y_past: &DMatrix<f64>) -> Result<Self> {
        if u_past.ncols() != y_past.ncols() {
            return Err(DdpcError::shape(
                "InitialCondition::from_window",
                format!("{} input vs {} output samples", u_past.ncols(), y_past.ncols()),
            ));
        }
        let (m, p) = (u_past.nrows(), y_past.nrows());
        let mut z = DVector::zeros((m + p) * u_past.ncols());
        for k in 0..u_past.ncols() {
            let o = k * (m + p);
            z.rows_mut(o, m).copy_from(&u_past.column(k));
            z.rows_mut(o + m, p).copy_from(&y_past.column(k));
        }
        Ok(Self { z_init: z })
    }

    /// Window of the `ρ` samples preceding time `t` in `batch`.
    pub fn from_batch(batch: &TrajectoryBatch, t: usize, rho: usize) -> Result<Self> {
        if t < rho || t > batch.len() {
            return Err(DdpcError::OutOfRange {
                index: t,
                len: batch.len(),
            });
        }
        Self::from_window(
            &batch.u.columns(t - rho, rho).into_owned(),
            &batch.y.columns(t - rho, rho).into_owned(),
        )
    }

    pub fn len(&self) -> usize {
        self.z_init.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_init.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSolution {
    pub gamma1: DVector<f64>,
    pub gamma2: DVector<f64>,
    pub alpha_star: Option<DVector<f64>>,
}

/// Factorizes the data and cross-checks `Ŷ_F` computed by projection against
/// the LQ identity.
pub fn build_predictor(h: HankelSet) -> Result<PredictorData> {
    let lq = linalg::lq_factorize(&h)?;
    let ranks = linalg::rank_report(&lq);
    let (m1, m2, _) = h.block_sizes();
    // Without an exciting input the future-input block is singular and no
    // input sequence can be mapped to a unique γ2.
    if linalg::numerical_rank(&lq.l22) < m2 {
        return Err(DdpcError::RankDeficient {
            rank: ranks.rank,
            expected: ranks.expected,
            past_rank: ranks.past_rank,
            past_expected: ranks.past_expected,
        });
    }

    let w = h.past_and_inputs();
    let w_pinv = linalg::pinv(&w);
    let projected = (&h.y_future * &w_pinv) * &w;
    let y_hat_f = lq.projected_future_outputs();
    let gap = (&projected - &y_hat_f).norm();
    let scale = h.y_future.norm().max(f64::MIN_POSITIVE);
    if gap > DUAL_PATH_TOL * scale {
        return Err(DdpcError::Invalid(format!(
            "projected future outputs disagree between projection and LQ paths \
             (relative gap {:e})",
            gap / scale
        )));
    }

    let l11_full = ranks.past_rank == m1;
    let l11_inv = if l11_full {
        lq.l11
            .solve_lower_triangular(&DMatrix::identity(m1, m1))
            .ok_or(DdpcError::Singular { block: "L11" })?
    } else {
        linalg::pinv(&lq.l11)
    };

    Ok(PredictorData {
        hankel: h,
        lq,
        y_hat_f,
        ranks,
        w_pinv,
        l11_inv,
        l11_full,
        pi: OnceLock::new(),
    })
}

/// `γ1 = L11⁻¹ z_init` by forward substitution, or the minimum-norm solution
/// when `L11` is singular (then `z_init` must be consistent with the data).
pub fn solve_gamma1(pd: &PredictorData, init: &InitialCondition) -> Result<DVector<f64>> {
    let m1 = pd.lq.l11.nrows();
    if init.len() != m1 {
        return Err(DdpcError::shape(
            "solve_gamma1",
            format!("z_init has {} entries, expected {m1}", init.len()),
        ));
    }
    let z = &init.z_init;
    let gamma1 = if pd.l11_full {
        pd.lq
            .l11
            .solve_lower_triangular(z)
            .ok_or(DdpcError::Singular { block: "L11" })?
    } else {
        &pd.l11_inv * z
    };
    let residual = (&pd.lq.l11 * &gamma1 - z).norm();
    if !pd.l11_full && residual > GAMMA1_RESIDUAL_TOL * z.norm().max(1.0) {
        return Err(DdpcError::Residual { residual });
    }
    Ok(gamma1)
}

/// `γ2 = L22⁻¹ (u_f - L21 γ1)`.
pub fn gamma2_for_input(pd: &PredictorData, gamma1: &DVector<f64>, u_f: &DVector<f64>) -> Result<DVector<f64>> {
    let (m1, m2) = (pd.lq.l11.nrows(), pd.lq.l22.nrows());
    if gamma1.len() != m1 || u_f.len() != m2 {
        return Err(DdpcError::shape(
            "gamma2_for_input",
            format!("γ1 {} / u_f {}, expected {m1} / {m2}", gamma1.len(), u_f.len()),
        ));
    }
    pd.lq
        .l22
        .solve_lower_triangular(&(u_f - &pd.lq.l21 * gamma1))
        .ok_or(DdpcError::Singular { block: "L22" })
}

/// `ŷ = L31 γ1 + L32 γ2`.
pub fn predict_output(pd: &PredictorData, gamma1: &DVector<f64>, gamma2: &DVector<f64>) -> Result<DVector<f64>> {
    if gamma1.len() != pd.lq.l31.ncols() || gamma2.len() != pd.lq.l32.ncols() {
        return Err(DdpcError::shape(
            "predict_output",
            format!(
                "γ1 {} / γ2 {}, expected {} / {}",
                gamma1.len(),
                gamma2.len(),
                pd.lq.l31.ncols(),
                pd.lq.l32.ncols()
            ),
        ));
    }
    Ok(&pd.lq.l31 * gamma1 + &pd.lq.l32 * gamma2)
}
