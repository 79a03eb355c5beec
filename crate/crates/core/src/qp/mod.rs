//! Dense convex QP solver.
//!
//! ```text
//! minimize   ½ xᵀ H x + fᵀ x
//! subject to a_eq x = b_eq,   lb ≤ a_in x ≤ ub
//! ```
//!
//! Infinite bounds are written as `±INF` (any magnitude ≥ 1e20 counts).

mod admm;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{DdpcError, Result};

pub use admm::QpSolver;

/// Sentinel magnitude for an absent bound.
pub const INF: f64 = 1e30;

pub(crate) fn is_infinite_bound(v: f64) -> bool {
    v.abs() >= 1e20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial ADMM step size for inequality rows.
    pub rho: f64,
    /// Proximal weight on x.
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    pub check_every: usize,
    pub scaling_iters: usize,
    /// Regularisation of the polishing KKT system.
    pub polish_delta: f64,
    pub refine_iters: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
            rho: 0.1,
            sigma: 1e-6,
            relaxation: 1.6,
            check_every: 25,
            scaling_iters: 10,
            polish_delta: 1e-7,
            refine_iters: 200,
        }
    }
}

impl QpSettings {
    pub fn with_tol(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self> {
        let p = Self {
            h,
            f,
            a_eq,
            b_eq,
            a_in,
            lb,
            ub,
        };
        p.validate()?;
        Ok(p)
    }

    /// `min ½ xᵀHx + fᵀx` with no constraints.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let n = f.len();
        Self::new(
            h,
            f,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::zeros(0),
        )
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Result<Self> {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self.validate()?;
        Ok(self)
    }

    pub fn with_inequalities(
        mut self,
        a_in: DMatrix<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self> {
        self.a_in = a_in;
        self.lb = lb;
        self.ub = ub;
        self.validate()?;
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f.len();
        let shape_err = |detail: String| Err(DdpcError::shape("QpProblem", detail));
        if self.h.shape() != (n, n) {
            return shape_err(format!("H is {:?} for {n} variables", self.h.shape()));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return shape_err(format!("a_eq {:?} vs b_eq {}", self.a_eq.shape(), self.b_eq.len()));
        }
        if self.a_in.ncols() != n
            || self.a_in.nrows() != self.lb.len()
            || self.lb.len() != self.ub.len()
        {
            return shape_err(format!(
                "a_in {:?} vs bounds {}/{}",
                self.a_in.shape(),
                self.lb.len(),
                self.ub.len()
            ));
        }
        let asym = (&self.h - self.h.transpose()).abs().max();
        if asym > 1e-10 * self.h.abs().max().max(1.0) {
            return Err(DdpcError::Invalid(format!("H not symmetric (max asymmetry {asym:e})")));
        }
        if let Some(i) = (0..self.lb.len()).find(|&i| self.lb[i] > self.ub[i]) {
            return Err(DdpcError::Invalid(format!(
                "row {i}: lower bound {} exceeds upper bound {}",
                self.lb[i], self.ub[i]
            )));
        }
        Ok(())
    }

    /// Plain-text dump: a header line with dimensions followed by each dense
    /// block as whitespace-separated rows.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| DdpcError::io("<qp dump>", e);
        let n = self.n_vars();
        writeln!(w, "qp {} {} {}", n, self.a_eq.nrows(), self.a_in.nrows()).map_err(io)?;
        let mut block = |name: &str, m: &DMatrix<f64>| -> std::io::Result<()> {
            writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
            for r in m.row_iter() {
                let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            Ok(())
        };
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(1, v.len(), v.as_slice());
        block("h", &self.h).map_err(io)?;
        block("f", &col(&self.f)).map_err(io)?;
        block("a_eq", &self.a_eq).map_err(io)?;
        block("b_eq", &col(&self.b_eq)).map_err(io)?;
        block("a_in", &self.a_in).map_err(io)?;
        block("lb", &col(&self.lb)).map_err(io)?;
        block("ub", &col(&self.ub)).map_err(io)?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| DdpcError::Invalid("truncated QP dump".into()))?
                .map_err(|e| DdpcError::io("<qp dump>", e))
        };
        let header = next()?;
        if !header.starts_with("qp ") {
            return Err(DdpcError::Invalid("QP dump must start with `qp`".into()));
        }
        let mut read_block = |name: &str| -> Result<DMatrix<f64>> {
            let head = next()?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let bad = || DdpcError::Invalid(format!("malformed block header `{head}`"));
            if parts.len() != 3 || parts[0] != name {
                return Err(bad());
            }
            let rows: usize = parts[1].parse().map_err(|_| bad())?;
            let cols: usize = parts[2].parse().map_err(|_| bad())?;
            let mut m = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                let line = next()?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| DdpcError::Invalid(format!("bad row in block {name}")))?;
                if vals.len() != cols {
                    return Err(DdpcError::Invalid(format!("row width mismatch in block {name}")));
                }
                for (j, v) in vals.into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            Ok(m)
        };
        let vec_of = |m: DMatrix<f64>| DVector::from_iterator(m.len(), m.iter().copied());
        let h = read_block("h")?;
        let f = vec_of(read_block("f")?);
        let a_eq = read_block("a_eq")?;
        let b_eq = vec_of(read_block("b_eq")?);
        let a_in = read_block("a_in")?;
        let lb = vec_of(read_block("lb")?);
        let ub = vec_of(read_block("ub")?);
        Self::new(h, f, a_eq, b_eq, a_in, lb, ub)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    /// Multipliers of the inequality rows; positive when the upper bound is
    /// active, negative at the lower bound.
    pub y_in: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// True when the returned point came from the active-set polish.
    pub polished: bool,
}

/// Solves a single problem from scratch with default settings apart from
/// the tolerance and iteration cap.
pub fn solve(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_with(p, &QpSettings::with_tol(tol, max_iter))
}

pub fn solve_with(p: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    p.validate()?;
    let mut solver = QpSolver::new(&p.h, &p.a_eq, &p.a_in, *settings)?;
    solver.solve(&p.f, &p.b_eq, &p.lb, &p.ub)
}

/// Adds `weight * ‖selector x‖₁` to the objective through split variables
/// `s⁺, s⁻ ≥ 0` with `selector x = s⁺ - s⁻`. The new decision vector is
/// `[x; s⁺; s⁻]`.
pub fn reformulate_l1(p: &QpProblem, weight: f64, selector: &DMatrix<f64>) -> Result<QpProblem> {
    if !(weight >= 0.0) {
        return Err(DdpcError::Invalid(format!("l1 weight {weight} must be nonnegative")));
    }
    let n = p.n_vars();
    if selector.ncols() != n {
        return Err(DdpcError::shape(
            "reformulate_l1",
            format!("selector has {} columns for {n} variables", selector.ncols()),
        ));
    }
    let k = selector.nrows();
    let nn = n + 2 * k;

    let mut h = DMatrix::zeros(nn, nn);
    h.view_mut((0, 0), (n, n)).copy_from(&p.h);
    let mut f = DVector::from_element(nn, weight);
    f.rows_mut(0, n).copy_from(&p.f);

    let me = p.a_eq.nrows();
    let mut a_eq = DMatrix::zeros(me + k, nn);
    a_eq.view_mut((0, 0), (me, n)).copy_from(&p.a_eq);
    a_eq.view_mut((me, 0), (k, n)).copy_from(selector);
    for i in 0..k {
        a_eq[(me + i, n + i)] = -1.0;
        a_eq[(me + i, n + k + i)] = 1.0;
    }
    let mut b_eq = DVector::zeros(me + k);
    b_eq.rows_mut(0, me).copy_from(&p.b_eq);

    let mi = p.a_in.nrows();
    let mut a_in = DMatrix::zeros(mi + 2 * k, nn);
    a_in.view_mut((0, 0), (mi, n)).copy_from(&p.a_in);
    for i in 0..2 * k {
        a_in[(mi + i, n + i)] = 1.0;
    }
    let mut lb = DVector::zeros(mi + 2 * k);
    lb.rows_mut(0, mi).copy_from(&p.lb);
    let mut ub = DVector::from_element(mi + 2 * k, INF);
    ub.rows_mut(0, mi).copy_from(&p.ub);

    QpProblem::new(h, f, a_eq, b_eq, a_in, lb, ub)
}
