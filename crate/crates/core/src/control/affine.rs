//! Common condensed form of every receding-horizon problem.
//!
//! A scheme fixes a decision vector `x` and a per-step context `c` (the data
//! it is re-solved for), with plans affine in both:
//!
//! ```text
//! u_plan = Gu x + Eu c        y_plan = Gy x + Ey c
//! ```
//!
//! The tracking cost over the plans plus a scheme-specific quadratic penalty
//! on `x` gives a QP whose Hessian and constraint matrices do not depend on
//! `c`, so the solver factorizations are reused across steps.

use nalgebra::{DMatrix, DVector};

use super::ControlSpec;
use crate::error::{DdpcError, Result};
use crate::linalg::stack_rows;
use crate::qp::{self, is_infinite_bound, QpProblem, QpSettings, QpSolution, QpSolver};

/// Equality rows `a x = b0 + bc c`.
pub(crate) struct EqualityRows {
    pub a: DMatrix<f64>,
    pub b0: DVector<f64>,
    pub bc: DMatrix<f64>,
}

pub(crate) struct AffineMaps {
    pub gu: DMatrix<f64>,
    pub eu: DMatrix<f64>,
    pub gy: DMatrix<f64>,
    pub ey: DMatrix<f64>,
    /// Hessian contribution of the regularization (`2λ` for `λ‖·‖²`).
    pub penalty: DMatrix<f64>,
    pub equalities: Vec<EqualityRows>,
}

impl AffineMaps {
    pub fn n_vars(&self) -> usize {
        self.gu.ncols()
    }

    pub fn n_context(&self) -> usize {
        self.eu.ncols()
    }
}

pub(crate) struct AffineQp {
    maps: AffineMaps,
    f0: DVector<f64>,
    fc: DMatrix<f64>,
    eq0: DVector<f64>,
    eqc: DMatrix<f64>,
    lb0: DVector<f64>,
    ub0: DVector<f64>,
    inc: DMatrix<f64>,
    solver: QpSolver,
}

fn block_diag_repeat(w: &DMatrix<f64>, times: usize) -> DMatrix<f64> {
    let k = w.nrows();
    let mut out = DMatrix::zeros(k * times, k * times);
    for i in 0..times {
        out.view_mut((i * k, i * k), (k, k)).copy_from(w);
    }
    out
}

fn tile(v: &DVector<f64>, times: usize) -> DVector<f64> {
    DVector::from_iterator(v.len() * times, (0..times).flat_map(|_| v.iter().copied()))
}

impl AffineQp {
    /// Assembles the QP. `l1` optionally adds `weight * ‖selector x‖₁`.
    pub fn new(
        spec: &ControlSpec,
        mut maps: AffineMaps,
        l1: Option<(f64, DMatrix<f64>)>,
        settings: QpSettings,
    ) -> Result<Self> {
        let t = spec.horizon;
        let (m, p) = (spec.r_weight.nrows(), spec.q_weight.nrows());
        let (nx, nc) = (maps.n_vars(), maps.n_context());
        if maps.gu.shape() != (m * t, nx)
            || maps.gy.shape() != (p * t, nx)
            || maps.eu.shape() != (m * t, nc)
            || maps.ey.shape() != (p * t, nc)
            || maps.penalty.shape() != (nx, nx)
        {
            return Err(DdpcError::shape("AffineQp::new", "plan maps inconsistent with spec"));
        }
        let qbar = block_diag_repeat(&spec.q_weight, t);
        let rbar = block_diag_repeat(&spec.r_weight, t);
        let yr = tile(&spec.y_ref, t);
        let ur = tile(&spec.u_ref, t);

        let gy_q = maps.gy.tr_mul(&qbar);
        let gu_r = maps.gu.tr_mul(&rbar);
        let mut h = 2.0 * (&gy_q * &maps.gy + &gu_r * &maps.gu) + &maps.penalty;
        h = 0.5 * (&h + h.transpose());
        let fc = 2.0 * (&gy_q * &maps.ey + &gu_r * &maps.eu);
        let f0 = -2.0 * (&gy_q * &yr + &gu_r * &ur);

        // Terminal rows: plans pinned to the references over the last ρ steps.
        if spec.terminal_constraint {
            let k0 = t - spec.rho;
            let mut a = Vec::new();
            let mut b0 = Vec::new();
            let mut bc = Vec::new();
            for k in k0..t {
                for i in 0..m {
                    let r = k * m + i;
                    a.push(maps.gu.row(r).into_owned());
                    b0.push(spec.u_ref[i]);
                    bc.push(-maps.eu.row(r).into_owned());
                }
                for i in 0..p {
                    let r = k * p + i;
                    a.push(maps.gy.row(r).into_owned());
                    b0.push(spec.y_ref[i]);
                    bc.push(-maps.ey.row(r).into_owned());
                }
            }
            maps.equalities.push(EqualityRows {
                a: DMatrix::from_rows(&a),
                b0: DVector::from_vec(b0),
                bc: DMatrix::from_rows(&bc),
            });
        }

        let eq_a: Vec<&DMatrix<f64>> = maps.equalities.iter().map(|e| &e.a).collect();
        let eq_c: Vec<&DMatrix<f64>> = maps.equalities.iter().map(|e| &e.bc).collect();
        let mut a_eq = if eq_a.is_empty() { DMatrix::zeros(0, nx) } else { stack_rows(&eq_a) };
        let mut eqc = if eq_c.is_empty() { DMatrix::zeros(0, nc) } else { stack_rows(&eq_c) };
        let mut eq0 = DVector::from_iterator(
            a_eq.nrows(),
            maps.equalities.iter().flat_map(|e| e.b0.iter().copied()),
        );

        // Box rows for every finite bound: lb - E c ≤ G x ≤ ub - E c.
        let mut rows = Vec::new();
        let mut ctx = Vec::new();
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        let boxes = [
            (&maps.gu, &maps.eu, &spec.u_box, m),
            (&maps.gy, &maps.ey, &spec.y_box, p),
        ];
        for (g, e, bounds, dim) in boxes {
            for k in 0..t {
                for i in 0..dim {
                    let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
                    if is_infinite_bound(lo) && is_infinite_bound(hi) {
                        continue;
                    }
                    let r = k * dim + i;
                    rows.push(g.row(r).into_owned());
                    ctx.push(-e.row(r).into_owned());
                    lb.push(if is_infinite_bound(lo) { -qp::INF } else { lo });
                    ub.push(if is_infinite_bound(hi) { qp::INF } else { hi });
                }
            }
        }
        let mut a_in = if rows.is_empty() { DMatrix::zeros(0, nx) } else { DMatrix::from_rows(&rows) };
        let mut inc = if ctx.is_empty() { DMatrix::zeros(0, nc) } else { DMatrix::from_rows(&ctx) };
        let mut lb0 = DVector::from_vec(lb);
        let mut ub0 = DVector::from_vec(ub);
        let mut f0 = f0;
        let mut fc = fc;

        if let Some((weight, selector)) = l1 {
            // Context-independent template; the split variables and their rows
            // are appended after the existing ones.
            let template = QpProblem::new(
                h.clone(),
                DVector::zeros(nx),
                a_eq.clone(),
                DVector::zeros(a_eq.nrows()),
                a_in.clone(),
                lb0.clone(),
                ub0.clone(),
            )?;
            let aug = qp::reformulate_l1(&template, weight, &selector)?;
            let nn = aug.n_vars();
            let pad_rows = |mtx: &DMatrix<f64>, rows: usize| {
                let mut out = DMatrix::zeros(rows, mtx.ncols());
                out.rows_mut(0, mtx.nrows()).copy_from(mtx);
                out
            };
            let pad_cols = |mtx: &DMatrix<f64>| {
                let mut out = DMatrix::zeros(mtx.nrows(), nn);
                out.columns_mut(0, mtx.ncols()).copy_from(mtx);
                out
            };
            let mut f0_aug = aug.f.clone();
            f0_aug.rows_mut(0, nx).copy_from(&f0);
            f0 = f0_aug;
            fc = pad_rows(&fc, nn);
            eqc = pad_rows(&eqc, aug.a_eq.nrows());
            eq0 = {
                let mut v = DVector::zeros(aug.a_eq.nrows());
                v.rows_mut(0, eq0.len()).copy_from(&eq0);
                v
            };
            inc = pad_rows(&inc, aug.a_in.nrows());
            lb0 = aug.lb.clone();
            ub0 = aug.ub.clone();
            maps.gu = pad_cols(&maps.gu);
            maps.gy = pad_cols(&maps.gy);
            h = aug.h;
            a_eq = aug.a_eq;
            a_in = aug.a_in;
        }

        let solver = QpSolver::new(&h, &a_eq, &a_in, settings)?;
        Ok(Self {
            maps,
            f0,
            fc,
            eq0,
            eqc,
            lb0,
            ub0,
            inc,
            solver,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.solver.n_vars()
    }

    pub fn solve(&mut self, c: &DVector<f64>) -> Result<QpSolution> {
        if c.len() != self.maps.n_context() {
            return Err(DdpcError::shape(
                "AffineQp::solve",
                format!("context has {} entries, expected {}", c.len(), self.maps.n_context()),
            ));
        }
        let f = &self.f0 + &self.fc * c;
        let b_eq = &self.eq0 + &self.eqc * c;
        let shift = &self.inc * c;
        let lb = DVector::from_iterator(
            self.lb0.len(),
            self.lb0.iter().zip(shift.iter()).map(|(l, s)| if *l <= -qp::INF { *l } else { l + s }),
        );
        let ub = DVector::from_iterator(
            self.ub0.len(),
            self.ub0.iter().zip(shift.iter()).map(|(u, s)| if *u >= qp::INF { *u } else { u + s }),
        );
        self.solver.solve(&f, &b_eq, &lb, &ub)
    }

    pub fn plans(&self, x: &DVector<f64>, c: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            &self.maps.gu * x + &self.maps.eu * c,
            &self.maps.gy * x + &self.maps.ey * c,
        )
    }
}
