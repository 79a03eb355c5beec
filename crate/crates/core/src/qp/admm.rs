//! Operator-splitting (ADMM) solver on the form `l ≤ A x ≤ u`, with Ruiz
//! equilibration and an active-set polish step.
//!
//! The constraint matrix stacks `[a_eq; a_in]`; equality rows carry `l = u`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::{is_infinite_bound, QpSettings, QpSolution, QpStatus, INF};
use crate::error::{DdpcError, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const INFEASIBILITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Equality,
    Free,
    Inequality,
}

// Active-set labels used by the polish step.
const INACTIVE: i8 = 0;
const LOWER: i8 = -1;
const UPPER: i8 = 1;
const FIXED: i8 = 2;

/// Reusable solver for a fixed `(H, a_eq, a_in)` with varying linear cost and
/// bounds. Factorizations are cached between calls.
pub struct QpSolver {
    settings: QpSettings,
    n: usize,
    m_eq: usize,
    p: DMatrix<f64>,
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
    admm_factor: Option<(Vec<f64>, Cholesky<f64, Dyn>)>,
    polish_factor: Option<(Vec<i8>, PolishSystem)>,
}

struct PolishSystem {
    exact: DMatrix<f64>,
    rows: Vec<usize>,
    /// `None` until tried; `Some(None)` when numerically singular.
    direct: Option<Option<LU<f64, Dyn, Dyn>>>,
    proximal: Option<LU<f64, Dyn, Dyn>>,
    prefer_proximal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PolishMode {
    Direct,
    Proximal,
}

struct Bounds {
    l: DVector<f64>,
    u: DVector<f64>,
    kinds: Vec<RowKind>,
}

struct Unscaled {
    x: DVector<f64>,
    y: DVector<f64>,
    primal: f64,
    dual: f64,
    eps_primal: f64,
    eps_dual: f64,
}

impl QpSolver {
    pub fn new(h: &DMatrix<f64>, a_eq: &DMatrix<f64>, a_in: &DMatrix<f64>, settings: QpSettings) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || a_eq.ncols() != n || a_in.ncols() != n {
            return Err(DdpcError::shape(
                "QpSolver::new",
                format!("H {:?}, a_eq {:?}, a_in {:?}", h.shape(), a_eq.shape(), a_in.shape()),
            ));
        }
        if !(settings.relaxation > 0.0 && settings.relaxation < 2.0) || settings.tol <= 0.0 {
            return Err(DdpcError::Invalid("QP settings out of range".into()));
        }
        let m_eq = a_eq.nrows();
        let a = crate::linalg::stack_rows(&[a_eq, a_in]);
        let (p, a, d, e, c) = equilibrate(h, &a, settings.scaling_iters);
        let at = a.transpose();
        Ok(Self {
            settings,
            n,
            m_eq,
            p,
            a,
            at,
            d,
            e,
            c,
            admm_factor: None,
            polish_factor: None,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn solve(
        &mut self,
        f: &DVector<f64>,
        b_eq: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
    ) -> Result<QpSolution> {
        let m = self.a.nrows();
        let m_in = m - self.m_eq;
        if f.len() != self.n || b_eq.len() != self.m_eq || lb.len() != m_in || ub.len() != m_in {
            return Err(DdpcError::shape(
                "QpSolver::solve",
                format!(
                    "f {}, b_eq {}, bounds {}/{} for n={} m_eq={} m_in={}",
                    f.len(),
                    b_eq.len(),
                    lb.len(),
                    ub.len(),
                    self.n,
                    self.m_eq,
                    m_in
                ),
            ));
        }
        if let Some(i) = (0..m_in).find(|&i| lb[i] > ub[i]) {
            return Err(DdpcError::Invalid(format!("row {i}: lower bound exceeds upper bound")));
        }
        let q = self.c * self.d.component_mul(f);
        let bounds = self.scaled_bounds(b_eq, lb, ub);

        // Fast path: only equality rows active.
        let eq_set: Vec<i8> = bounds
            .kinds
            .iter()
            .map(|k| if *k == RowKind::Equality { FIXED } else { INACTIVE })
            .collect();
        if let Some(sol) = self.try_polish(&eq_set, &q, &bounds, f)? {
            return Ok(sol);
        }
        self.admm(&q, &bounds, f)
    }

    fn scaled_bounds(&self, b_eq: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> Bounds {
        let m = self.a.nrows();
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        let mut kinds = Vec::with_capacity(m);
        for i in 0..m {
            let (lo, hi) = if i < self.m_eq {
                (b_eq[i], b_eq[i])
            } else {
                (lb[i - self.m_eq], ub[i - self.m_eq])
            };
            let lo_inf = is_infinite_bound(lo) && lo < 0.0;
            let hi_inf = is_infinite_bound(hi) && hi > 0.0;
            l[i] = if lo_inf { -INF } else { self.e[i] * lo };
            u[i] = if hi_inf { INF } else { self.e[i] * hi };
            kinds.push(if lo_inf && hi_inf {
                RowKind::Free
            } else if !lo_inf && !hi_inf && lo == hi {
                RowKind::Equality
            } else {
                RowKind::Inequality
            });
        }
        Bounds { l, u, kinds }
    }

    fn row_rho(&self, kinds: &[RowKind], rho: f64) -> Vec<f64> {
        kinds
            .iter()
            .map(|k| match k {
                RowKind::Equality => (RHO_EQ_FACTOR * rho).min(RHO_MAX * RHO_EQ_FACTOR),
                RowKind::Free => RHO_MIN,
                RowKind::Inequality => rho,
            })
            .collect()
    }

    fn admm_system(&mut self, rho: &[f64]) -> Result<()> {
        if matches!(&self.admm_factor, Some((r, _)) if r.as_slice() == rho) {
            return Ok(());
        }
        let mut scaled_a = self.a.clone();
        for (i, mut row) in scaled_a.row_iter_mut().enumerate() {
            row *= rho[i];
        }
        let mut k = &self.at * scaled_a + &self.p;
        for i in 0..self.n {
            k[(i, i)] += self.settings.sigma;
        }
        let chol = Cholesky::new(k).ok_or_else(|| DdpcError::Invalid("quadratic cost is not positive semidefinite".into()))?;
        self.admm_factor = Some((rho.to_vec(), chol));
        Ok(())
    }

    fn admm(&mut self, q: &DVector<f64>, b: &Bounds, f: &DVector<f64>) -> Result<QpSolution> {
        let s = self.settings;
        let (n, m) = (self.n, self.a.nrows());
        let mut rho_scalar = s.rho;
        let mut rho = DVector::from_vec(self.row_rho(&b.kinds, rho_scalar));
        self.admm_system(rho.as_slice())?;

        let mut x = DVector::<f64>::zeros(n);
        let mut z = DVector::<f64>::zeros(m);
        let mut y = DVector::<f64>::zeros(m);
        let mut y_prev = y.clone();
        let mut last_polish: Option<Vec<i8>> = None;
        let alpha = s.relaxation;

        for iter in 1..=s.max_iter {
            y_prev.copy_from(&y);
            let rhs = s.sigma * &x - q + &self.at * (rho.component_mul(&z) - &y);
            let x_tilde = self.admm_factor.as_ref().expect("factorized").1.solve(&rhs);
            let z_tilde = &self.a * &x_tilde;
            x = alpha * &x_tilde + (1.0 - alpha) * &x;
            let z_relaxed = alpha * &z_tilde + (1.0 - alpha) * &z;
            let mut z_next = &z_relaxed + y.component_div(&rho);
            for i in 0..m {
                z_next[i] = z_next[i].clamp(b.l[i], b.u[i]);
            }
            y += rho.component_mul(&(&z_relaxed - &z_next));
            z = z_next;

            if iter % s.check_every != 0 && iter != s.max_iter {
                continue;
            }
            let un = self.unscale(&x, &z, &y, q);
            let converged = un.primal <= un.eps_primal && un.dual <= un.eps_dual;
            let nearly = un.primal <= 1e3 * un.eps_primal && un.dual <= 1e3 * un.eps_dual;
            if nearly {
                let active = active_set(&z, &y, b);
                if last_polish.as_ref() != Some(&active) {
                    if let Some(sol) = self.try_polish(&active, q, b, f)? {
                        return Ok(QpSolution { iterations: iter, ..sol });
                    }
                    last_polish = Some(active);
                }
            }
            if converged {
                return Ok(self.finish(un, f, QpStatus::Optimal, iter, false));
            }
            if self.certifies_infeasibility(&(&y - &y_prev), b) {
                return Ok(self.finish(un, f, QpStatus::Infeasible, iter, false));
            }
            if iter == s.max_iter {
                return Ok(self.finish(un, f, QpStatus::MaxIterations, iter, false));
            }

            // Step-size adaptation from the scaled residual balance.
            let ax = &self.a * &x;
            let prim_norm = ax.amax().max(z.amax()).max(1e-30);
            let dual_norm = (&self.p * &x).amax().max((&self.at * &y).amax()).max(q.amax()).max(1e-30);
            let r_p = (&ax - &z).amax() / prim_norm;
            let r_d = (&self.p * &x + q + &self.at * &y).amax() / dual_norm;
            let ratio = (r_p / r_d.max(1e-30)).sqrt();
            if !(0.2..=5.0).contains(&ratio) {
                rho_scalar = (rho_scalar * ratio).clamp(RHO_MIN, RHO_MAX);
                rho = DVector::from_vec(self.row_rho(&b.kinds, rho_scalar));
                self.admm_system(rho.as_slice())?;
            }
        }
        unreachable!("loop returns at max_iter")
    }

    fn certifies_infeasibility(&self, dy: &DVector<f64>, b: &Bounds) -> bool {
        let dy_unscaled = self.e.component_mul(dy);
        let norm = dy_unscaled.amax();
        if norm <= 1e-30 {
            return false;
        }
        let eps = INFEASIBILITY_TOL * norm;
        let at_dy = self.d.map(|v| 1.0 / v).component_mul(&(&self.at * dy));
        if at_dy.amax() > eps {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let v = dy_unscaled[i];
            if v > 0.0 {
                if b.u[i] >= INF {
                    if v > eps {
                        return false;
                    }
                } else {
                    support += b.u[i] / self.e[i] * v;
                }
            } else if v < 0.0 {
                if b.l[i] <= -INF {
                    if -v > eps {
                        return false;
                    }
                } else {
                    support += b.l[i] / self.e[i] * v;
                }
            }
        }
        support < -eps
    }

    fn unscale(&self, x_bar: &DVector<f64>, z_bar: &DVector<f64>, y_bar: &DVector<f64>, q_bar: &DVector<f64>) -> Unscaled {
        let tol = self.settings.tol;
        let d_inv = self.d.map(|v| 1.0 / v);
        let e_inv = self.e.map(|v| 1.0 / v);
        let x = self.d.component_mul(x_bar);
        let y = self.e.component_mul(y_bar) / self.c;
        let ax = e_inv.component_mul(&(&self.a * x_bar));
        let z = e_inv.component_mul(z_bar);
        let px = d_inv.component_mul(&(&self.p * x_bar)) / self.c;
        let aty = d_inv.component_mul(&(&self.at * y_bar)) / self.c;
        let q = d_inv.component_mul(q_bar) / self.c;
        let primal = (&ax - &z).amax();
        let dual = (&px + &q + &aty).amax();
        // Residuals cannot be computed below the rounding error of the
        // products, which for heavily cancelling terms exceeds `tol`.
        let round = f64::EPSILON * (self.n + self.a.nrows()) as f64;
        let px_floor = d_inv.component_mul(&(self.p.abs() * x_bar.abs())).amax() / self.c;
        let aty_floor = d_inv.component_mul(&(self.at.abs() * y_bar.abs())).amax() / self.c;
        let ax_floor = e_inv.component_mul(&(self.a.abs() * x_bar.abs())).amax();
        Unscaled {
            x,
            y,
            primal,
            dual,
            eps_primal: tol * (1.0 + ax.amax().max(z.amax())) + round * ax_floor,
            eps_dual: tol * (1.0 + px.amax().max(aty.amax()).max(q.amax())) + round * (px_floor + aty_floor),
        }
    }

    fn finish(&self, un: Unscaled, f: &DVector<f64>, status: QpStatus, iterations: usize, polished: bool) -> QpSolution {
        let objective = self.objective(&un.x, f);
        QpSolution {
            y_eq: un.y.rows(0, self.m_eq).into_owned(),
            y_in: un.y.rows(self.m_eq, un.y.len() - self.m_eq).into_owned(),
            x: un.x,
            objective,
            status,
            iterations,
            primal_residual: un.primal,
            dual_residual: un.dual,
            polished,
        }
    }

    fn objective(&self, x: &DVector<f64>, f: &DVector<f64>) -> f64 {
        // ½xᵀHx with H = D⁻¹ P̄ D⁻¹ / c
        let xs = self.d.map(|v| 1.0 / v).component_mul(x);
        0.5 * xs.dot(&(&self.p * &xs)) / self.c + f.dot(x)
    }

    fn polish_system(&mut self, active: &[i8]) -> Result<()> {
        if matches!(&self.polish_factor, Some((k, _)) if k.as_slice() == active) {
            return Ok(());
        }
        let n = self.n;
        let rows: Vec<usize> = (0..active.len()).filter(|&i| active[i] != INACTIVE).collect();
        let k = n + rows.len();
        let mut exact = DMatrix::zeros(k, k);
        exact.view_mut((0, 0), (n, n)).copy_from(&self.p);
        for (r, &i) in rows.iter().enumerate() {
            let row = self.a.row(i);
            exact.view_mut((n + r, 0), (1, n)).copy_from(&row);
            exact.view_mut((0, n + r), (n, 1)).copy_from(&row.transpose());
        }
        self.polish_factor = Some((
            active.to_vec(),
            PolishSystem {
                exact,
                rows,
                direct: None,
                proximal: None,
                prefer_proximal: false,
            },
        ));
        Ok(())
    }

    fn polish_lu(&mut self, mode: PolishMode) -> Option<&LU<f64, Dyn, Dyn>> {
        let n = self.n;
        let delta = self.settings.polish_delta;
        let sys = &mut self.polish_factor.as_mut().expect("built").1;
        match mode {
            PolishMode::Direct => sys
                .direct
                .get_or_insert_with(|| {
                    let lu = sys.exact.clone().lu();
                    let diag = lu.u().diagonal().abs();
                    (diag.min() > 1e-15 * diag.max()).then_some(lu)
                })
                .as_ref(),
            PolishMode::Proximal => Some(sys.proximal.get_or_insert_with(|| {
                let mut reg = sys.exact.clone();
                for i in 0..reg.nrows() {
                    reg[(i, i)] += if i < n { delta } else { -delta };
                }
                reg.lu()
            })),
        }
    }

    /// Solves the equality-constrained problem on `active`, then accepts the
    /// result only if it satisfies every bound and multiplier sign.
    ///
    /// The KKT matrix is first factorized as is; when that is singular or
    /// too inaccurate, a proximal regularization with iterative refinement
    /// is used instead, which tolerates a singular cost on the constraint
    /// null space.
    fn try_polish(&mut self, active: &[i8], q: &DVector<f64>, b: &Bounds, f: &DVector<f64>) -> Result<Option<QpSolution>> {
        self.polish_system(active)?;
        let n = self.n;
        let (rhs, prefer_proximal) = {
            let sys = &self.polish_factor.as_ref().expect("built").1;
            let mut rhs = DVector::zeros(n + sys.rows.len());
            rhs.rows_mut(0, n).copy_from(&(-q));
            for (r, &i) in sys.rows.iter().enumerate() {
                rhs[n + r] = if active[i] == UPPER { b.u[i] } else { b.l[i] };
            }
            (rhs, sys.prefer_proximal)
        };
        let modes: &[PolishMode] = if prefer_proximal {
            &[PolishMode::Proximal]
        } else {
            &[PolishMode::Direct, PolishMode::Proximal]
        };
        for &mode in modes {
            let refine = match mode {
                PolishMode::Direct => 3,
                PolishMode::Proximal => self.settings.refine_iters,
            };
            let Some(sol) = self.kkt_solve(mode, &rhs, refine) else { continue };
            if let Some(done) = self.accept_polish(&sol, active, q, b, f) {
                if mode == PolishMode::Proximal {
                    self.polish_factor.as_mut().expect("built").1.prefer_proximal = true;
                }
                return Ok(Some(done));
            }
        }
        Ok(None)
    }

    fn kkt_solve(&mut self, mode: PolishMode, rhs: &DVector<f64>, refine: usize) -> Option<DVector<f64>> {
        self.polish_lu(mode)?;
        let sys = &self.polish_factor.as_ref().expect("built").1;
        let lu = match mode {
            PolishMode::Direct => sys.direct.as_ref()?.as_ref()?,
            PolishMode::Proximal => sys.proximal.as_ref()?,
        };
        let mut sol = lu.solve(rhs)?;
        let scale = rhs.amax().max(1.0);
        for _ in 0..refine {
            let resid = rhs - &sys.exact * &sol;
            if resid.amax() <= 1e-14 * scale {
                break;
            }
            let corr = lu.solve(&resid)?;
            sol += &corr;
            if corr.amax() <= 1e-15 * sol.amax().max(1.0) {
                break;
            }
        }
        sol.iter().all(|v| v.is_finite()).then_some(sol)
    }

    fn accept_polish(
        &self,
        sol: &DVector<f64>,
        active: &[i8],
        q: &DVector<f64>,
        b: &Bounds,
        f: &DVector<f64>,
    ) -> Option<QpSolution> {
        let n = self.n;
        let sys = &self.polish_factor.as_ref().expect("built").1;
        let x_bar = sol.rows(0, n).into_owned();
        let mut y_bar = DVector::zeros(self.a.nrows());
        for (r, &i) in sys.rows.iter().enumerate() {
            y_bar[i] = sol[n + r];
        }
        let z_raw = &self.a * &x_bar;
        let z_bar = DVector::from_iterator(z_raw.len(), (0..z_raw.len()).map(|i| z_raw[i].clamp(b.l[i], b.u[i])));
        let un = self.unscale(&x_bar, &z_bar, &y_bar, q);
        if un.primal > un.eps_primal || un.dual > un.eps_dual {
            return None;
        }
        let sign_ok = active.iter().zip(un.y.iter()).all(|(&a, &y)| match a {
            LOWER => y <= un.eps_dual,
            UPPER => y >= -un.eps_dual,
            _ => true,
        });
        sign_ok.then(|| self.finish(un, f, QpStatus::Optimal, 0, true))
    }
}

fn active_set(z: &DVector<f64>, y: &DVector<f64>, b: &Bounds) -> Vec<i8> {
    (0..z.len())
        .map(|i| match b.kinds[i] {
            RowKind::Equality => FIXED,
            RowKind::Free => INACTIVE,
            RowKind::Inequality => {
                if b.l[i] > -INF && z[i] - b.l[i] < -y[i] {
                    LOWER
                } else if b.u[i] < INF && b.u[i] - z[i] < y[i] {
                    UPPER
                } else {
                    INACTIVE
                }
            }
        })
        .collect()
}

/// Ruiz equilibration of the KKT matrix `[P Aᵀ; A 0]` followed by a cost
/// scaling. Returns `(c·D P D, E A D, D, E, c)`.
fn equilibrate(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    iters: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let (n, m) = (p.nrows(), a.nrows());
    let mut p = p.clone();
    let mut a = a.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let clip = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..iters {
        let dd = DVector::from_iterator(
            n,
            (0..n).map(|j| {
                let norm = p.column(j).amax().max(if m > 0 { a.column(j).amax() } else { 0.0 });
                1.0 / clip(norm).sqrt()
            }),
        );
        let ee = DVector::from_iterator(m, (0..m).map(|i| 1.0 / clip(a.row(i).amax()).sqrt()));
        for j in 0..n {
            p.column_mut(j).scale_mut(dd[j]);
            a.column_mut(j).scale_mut(dd[j]);
        }
        for i in 0..n {
            p.row_mut(i).scale_mut(dd[i]);
        }
        for i in 0..m {
            a.row_mut(i).scale_mut(ee[i]);
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&ee);
    }
    let mean_col = if n > 0 {
        (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64
    } else {
        0.0
    };
    let c = 1.0 / clip(mean_col);
    p *= c;
    (p, a, d, e, c)
}
