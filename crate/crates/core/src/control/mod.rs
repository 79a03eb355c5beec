//! Receding-horizon controllers: a model-based oracle and the data-driven
//! schemes, all sharing one condensed QP form.

mod affine;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DdpcError, Result};
use crate::plant::LinearSystem;
use crate::predictor::{solve_gamma1, InitialCondition, PredictorData};
use crate::qp::{QpSettings, QpSolution, QpStatus, INF};

use affine::{AffineMaps, AffineQp, EqualityRows};

/// Per-coordinate bounds; `±INF` (or any magnitude ≥ 1e20) means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![-INF; dim],
            upper: vec![INF; dim],
        }
    }

    pub fn symmetric(limit: f64, dim: usize) -> Self {
        Self {
            lower: vec![-limit; dim],
            upper: vec![limit; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.iter()
            .enumerate()
            .all(|(k, x)| {
                let i = k % self.dim();
                *x >= self.lower[i] - tol && *x <= self.upper[i] + tol
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpec {
    pub horizon: usize,
    pub rho: usize,
    pub q_weight: DMatrix<f64>,
    pub r_weight: DMatrix<f64>,
    pub y_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
    pub u_box: BoxBounds,
    pub y_box: BoxBounds,
    /// Pin `u` and `y` to their references over the last `ρ` plan steps.
    pub terminal_constraint: bool,
}

impl ControlSpec {
    /// Regulation to zero with `Q = I`, `R = r·I` and no constraints.
    pub fn regulation(m: usize, p: usize, horizon: usize, rho: usize, r: f64) -> Self {
        Self {
            horizon,
            rho,
            q_weight: DMatrix::identity(p, p),
            r_weight: DMatrix::identity(m, m) * r,
            y_ref: DVector::zeros(p),
            u_ref: DVector::zeros(m),
            u_box: BoxBounds::unbounded(m),
            y_box: BoxBounds::unbounded(p),
            terminal_constraint: false,
        }
    }

    /// `T = 40`, `ρ = 23`, `Q = 1`, `R = 1e-3` for the single-input
    /// single-output benchmark plant.
    pub fn benchmark() -> Self {
        Self::regulation(1, 1, 40, 23, 1e-3)
    }

    pub fn m_inputs(&self) -> usize {
        self.r_weight.nrows()
    }

    pub fn p_outputs(&self) -> usize {
        self.q_weight.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, p) = (self.m_inputs(), self.p_outputs());
        let bad = |key: &str, message: String| {
            Err(DdpcError::Config {
                key: key.to_string(),
                message,
            })
        };
        if self.horizon == 0 || self.rho == 0 {
            return bad("horizon", "horizon and rho must be positive".into());
        }
        if !self.q_weight.is_square() || !self.r_weight.is_square() {
            return bad("weights", "Q and R must be square".into());
        }
        if self.y_ref.len() != p || self.y_box.dim() != p || self.y_box.upper.len() != p {
            return bad("y_ref", format!("output references and bounds must have {p} entries"));
        }
        if self.u_ref.len() != m || self.u_box.dim() != m || self.u_box.upper.len() != m {
            return bad("u_ref", format!("input references and bounds must have {m} entries"));
        }
        let sym = |w: &DMatrix<f64>| (w - w.transpose()).amax() <= 1e-12 * w.amax().max(1.0);
        if !sym(&self.q_weight) || !sym(&self.r_weight) {
            return bad("weights", "Q and R must be symmetric".into());
        }
        if self.q_weight.symmetric_eigenvalues().min() < -1e-12 {
            return bad("q_weight", "Q must be positive semidefinite".into());
        }
        if self.r_weight.symmetric_eigenvalues().min() <= 0.0 {
            return bad("r_weight", "R must be positive definite".into());
        }
        for b in [&self.u_box, &self.y_box] {
            if b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
                return bad("box", "lower bound above upper bound".into());
            }
        }
        if self.terminal_constraint && self.rho > self.horizon {
            return bad("terminal_constraint", format!("rho {} exceeds horizon {}", self.rho, self.horizon));
        }
        Ok(())
    }

    /// `Σ ‖y_k - y_r‖²_Q + ‖u_k - u_r‖²_R` over a stacked plan.
    pub fn plan_cost(&self, u_plan: &DVector<f64>, y_plan: &DVector<f64>) -> f64 {
        let (m, p) = (self.m_inputs(), self.p_outputs());
        (0..self.horizon)
            .map(|k| {
                let du = u_plan.rows(k * m, m) - &self.u_ref;
                let dy = y_plan.rows(k * p, p) - &self.y_ref;
                dy.dot(&(&self.q_weight * &dy)) + du.dot(&(&self.r_weight * &du))
            })
            .sum()
    }
}

/// Which controller to run and its regularization weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeConfig {
    OracleMpc,
    Spc,
    SpcSlack {
        lambda: f64,
    },
    Berberich {
        bar_lambda_alpha: f64,
        lambda_sigma: f64,
        /// Adds `σ_y = Y_F (I - Π) α`, which forces `y = Ŷ_F α`.
        #[serde(default)]
        null_output_slack: bool,
    },
    ElasticNet {
        lambda1: f64,
        lambda2: f64,
    },
    GammaDdpc,
    GammaDdpcBeta {
        beta: f64,
    },
    GammaThreeEta {
        eta: f64,
    },
}

impl SchemeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OracleMpc => "oracle_mpc",
            Self::Spc => "spc",
            Self::SpcSlack { .. } => "spc_slack",
            Self::Berberich { .. } => "berberich",
            Self::ElasticNet { .. } => "elastic_net",
            Self::GammaDdpc => "gamma_ddpc",
            Self::GammaDdpcBeta { .. } => "gamma_ddpc_beta",
            Self::GammaThreeEta { .. } => "gamma_three_eta",
        }
    }

    /// Names of the tunable weights, in token order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::OracleMpc | Self::Spc | Self::GammaDdpc => &[],
            Self::SpcSlack { .. } => &["lambda"],
            Self::Berberich { .. } => &["bar_lambda_alpha", "lambda_sigma"],
            Self::ElasticNet { .. } => &["lambda1", "lambda2"],
            Self::GammaDdpcBeta { .. } => &["beta"],
            Self::GammaThreeEta { .. } => &["eta"],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::OracleMpc | Self::Spc | Self::GammaDdpc => vec![],
            Self::SpcSlack { lambda } => vec![lambda],
            Self::Berberich {
                bar_lambda_alpha,
                lambda_sigma,
                ..
            } => vec![bar_lambda_alpha, lambda_sigma],
            Self::ElasticNet { lambda1, lambda2 } => vec![lambda1, lambda2],
            Self::GammaDdpcBeta { beta } => vec![beta],
            Self::GammaThreeEta { eta } => vec![eta],
        }
    }

    /// Copy with the weight `name` replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut s = *self;
        let slot = match (&mut s, name) {
            (Self::SpcSlack { lambda }, "lambda") => lambda,
            (Self::Berberich { bar_lambda_alpha, .. }, "bar_lambda_alpha") => bar_lambda_alpha,
            (Self::Berberich { lambda_sigma, .. }, "lambda_sigma") => lambda_sigma,
            (Self::ElasticNet { lambda1, .. }, "lambda1") => lambda1,
            (Self::ElasticNet { lambda2, .. }, "lambda2") => lambda2,
            (Self::GammaDdpcBeta { beta }, "beta") => beta,
            (Self::GammaThreeEta { eta }, "eta") => eta,
            _ => {
                return Err(DdpcError::Config {
                    key: name.to_string(),
                    message: format!("scheme {} has no parameter `{name}`", self.name()),
                })
            }
        };
        *slot = value;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.params().into_iter().find(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(DdpcError::Config {
                key: self.name().to_string(),
                message: format!("penalty {v} must be finite and nonnegative"),
            });
        }
        Ok(())
    }

    /// Parses `name[:w1[:w2]]`, e.g. `spc_slack:1e4` or `berberich:1e-4:1e2`.
    /// Missing weights default to 1.
    pub fn parse_token(token: &str) -> Result<Self> {
        let mut parts = token.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let vals: Vec<f64> = parts
            .map(|s| {
                s.parse::<f64>().map_err(|_| DdpcError::Config {
                    key: token.to_string(),
                    message: format!("`{s}` is not a number"),
                })
            })
            .collect::<Result<_>>()?;
        let base = match name {
            "oracle_mpc" => Self::OracleMpc,
            "spc" => Self::Spc,
            "spc_slack" => Self::SpcSlack { lambda: 1.0 },
            "berberich" => Self::Berberich {
                bar_lambda_alpha: 1.0,
                lambda_sigma: 1.0,
                null_output_slack: false,
            },
            "elastic_net" => Self::ElasticNet {
                lambda1: 1.0,
                lambda2: 1.0,
            },
            "gamma_ddpc" => Self::GammaDdpc,
            "gamma_ddpc_beta" => Self::GammaDdpcBeta { beta: 1.0 },
            "gamma_three_eta" => Self::GammaThreeEta { eta: 1.0 },
            _ => {
                return Err(DdpcError::Config {
                    key: "scheme".into(),
                    message: format!("unknown scheme `{name}`"),
                })
            }
        };
        let names = base.param_names();
        if vals.len() > names.len() {
            return Err(DdpcError::Config {
                key: token.to_string(),
                message: format!("{name} takes at most {} weights", names.len()),
            });
        }
        vals.iter()
            .zip(names)
            .try_fold(base, |s, (v, n)| s.with_param(n, *v))
    }

    pub fn is_data_driven(&self) -> bool {
        !matches!(self, Self::OracleMpc)
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        for v in self.params() {
            write!(f, ":{v:e}")?;
        }
        Ok(())
    }
}

/// Solver summary attached to every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverStats {
    pub status: QpStatus,
    pub iterations: usize,
    pub n_variables: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
}

impl SolverStats {
    fn from_solution(s: &QpSolution, n_variables: usize) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            n_variables,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            objective: s.objective,
            polished: s.polished,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub u_first: DVector<f64>,
    pub u_plan: DVector<f64>,
    pub y_plan: DVector<f64>,
    pub solver: SolverStats,
    /// Scheme diagnostics such as `sigma_norm`, `alpha_l1`, `gamma3_norm`.
    pub extras: BTreeMap<String, f64>,
}

/// What a controller is re-solved for at each step.
#[derive(Debug, Clone, Copy)]
pub enum Measurement<'m> {
    /// Past `ρ` input/output samples, for the data-driven schemes.
    Window(&'m InitialCondition),
    /// State estimate, for the oracle.
    State(&'m DVector<f64>),
}

enum Context {
    Window,
    Gamma1,
    State,
}

/// A scheme bound to its data, with factorizations cached across steps.
pub struct Controller<'a> {
    scheme: SchemeConfig,
    spec: ControlSpec,
    pd: Option<&'a PredictorData>,
    context: Context,
    qp: AffineQp,
}

fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let nrows = blocks[0].nrows();
    let ncols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(nrows, ncols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(*b);
        c += b.ncols();
    }
    out
}

fn diag_penalty(blocks: &[(usize, f64)]) -> DMatrix<f64> {
    let d = DVector::from_iterator(
        blocks.iter().map(|b| b.0).sum(),
        blocks.iter().flat_map(|&(n, w)| std::iter::repeat_n(2.0 * w, n)),
    );
    DMatrix::from_diagonal(&d)
}

fn alpha_settings() -> QpSettings {
    QpSettings {
        max_iter: 100_000,
        ..QpSettings::default()
    }
}

impl<'a> Controller<'a> {
    /// Model-based MPC on the true plant, driven by a state estimate.
    pub fn oracle(sys: &LinearSystem, spec: &ControlSpec) -> Result<Controller<'static>> {
        spec.validate()?;
        if spec.m_inputs() != sys.m_inputs() || spec.p_outputs() != sys.p_outputs() {
            return Err(DdpcError::shape("Controller::oracle", "spec weights do not match plant"));
        }
        let mt = sys.m_inputs() * spec.horizon;
        let maps = AffineMaps {
            gu: DMatrix::identity(mt, mt),
            eu: DMatrix::zeros(mt, sys.n_states()),
            gy: sys.input_toeplitz(spec.horizon),
            ey: sys.observability(spec.horizon),
            penalty: DMatrix::zeros(mt, mt),
            equalities: vec![],
        };
        Ok(Controller {
            scheme: SchemeConfig::OracleMpc,
            spec: spec.clone(),
            pd: None,
            context: Context::State,
            qp: AffineQp::new(spec, maps, None, QpSettings::default())?,
        })
    }

    pub fn data_driven(pd: &'a PredictorData, spec: &ControlSpec, scheme: SchemeConfig) -> Result<Self> {
        spec.validate()?;
        scheme.validate()?;
        let (m, p) = (pd.m_inputs(), pd.p_outputs());
        if spec.m_inputs() != m || spec.p_outputs() != p || spec.horizon != pd.horizon() || spec.rho != pd.rho() {
            return Err(DdpcError::shape(
                "Controller::data_driven",
                format!(
                    "spec (T={}, rho={}) does not match data (T={}, rho={})",
                    spec.horizon,
                    spec.rho,
                    pd.horizon(),
                    pd.rho()
                ),
            ));
        }
        let lq = &pd.lq;
        let h = &pd.hankel;
        let (m1, mt, pt) = (lq.l11.nrows(), lq.l22.nrows(), lq.l33.nrows());
        let n = pd.n_cols();
        let mut l1 = None;
        let mut settings = QpSettings::default();

        let (maps, context) = match scheme {
            SchemeConfig::OracleMpc => {
                return Err(DdpcError::Invalid("the oracle needs the plant, not data".into()))
            }
            SchemeConfig::GammaDdpc | SchemeConfig::GammaDdpcBeta { .. } => {
                let beta = match scheme {
                    SchemeConfig::GammaDdpcBeta { beta } => beta,
                    _ => 0.0,
                };
                (
                    AffineMaps {
                        gu: lq.l22.clone(),
                        eu: lq.l21.clone(),
                        gy: lq.l32.clone(),
                        ey: lq.l31.clone(),
                        penalty: diag_penalty(&[(mt, beta)]),
                        equalities: vec![],
                    },
                    Context::Gamma1,
                )
            }
            SchemeConfig::GammaThreeEta { eta } => (
                AffineMaps {
                    gu: hstack(&[&lq.l22, &DMatrix::zeros(mt, pt)]),
                    eu: lq.l21.clone(),
                    gy: hstack(&[&lq.l32, &lq.l33]),
                    ey: lq.l31.clone(),
                    penalty: diag_penalty(&[(mt, 0.0), (pt, eta)]),
                    equalities: vec![],
                },
                Context::Gamma1,
            ),
            SchemeConfig::SpcSlack { lambda } => {
                // γ1 = γ1* + L11⁻¹ σ
                let linv = pd.l11_inverse();
                (
                    AffineMaps {
                        gu: hstack(&[&(&lq.l21 * linv), &lq.l22]),
                        eu: lq.l21.clone(),
                        gy: hstack(&[&(&lq.l31 * linv), &lq.l32]),
                        ey: lq.l31.clone(),
                        penalty: diag_penalty(&[(m1, lambda), (mt, 0.0)]),
                        equalities: vec![],
                    },
                    Context::Gamma1,
                )
            }
            SchemeConfig::Spc => {
                let (kz, ku) = pd.spc_gains();
                (
                    AffineMaps {
                        gu: DMatrix::identity(mt, mt),
                        eu: DMatrix::zeros(mt, m1),
                        gy: ku,
                        ey: kz,
                        penalty: DMatrix::zeros(mt, mt),
                        equalities: vec![],
                    },
                    Context::Window,
                )
            }
            SchemeConfig::Berberich {
                bar_lambda_alpha,
                lambda_sigma,
                null_output_slack,
            } => {
                // x = [α; σ_init; σ_y], u = U_F α, y = Y_F α - σ_y
                let p_rho = p * spec.rho;
                let mut selector = DMatrix::zeros(m1, p_rho);
                for k in 0..spec.rho {
                    for i in 0..p {
                        selector[(k * (m + p) + m + i, k * p + i)] = 1.0;
                    }
                }
                let mut equalities = vec![EqualityRows {
                    a: hstack(&[&h.z_past, &(-selector), &DMatrix::zeros(m1, pt)]),
                    b0: DVector::zeros(m1),
                    bc: DMatrix::identity(m1, m1),
                }];
                if null_output_slack {
                    let residual = &h.y_future - &pd.y_hat_f;
                    equalities.push(EqualityRows {
                        a: hstack(&[&(-residual), &DMatrix::zeros(pt, p_rho), &DMatrix::identity(pt, pt)]),
                        b0: DVector::zeros(pt),
                        bc: DMatrix::zeros(pt, m1),
                    });
                }
                settings = alpha_settings();
                (
                    AffineMaps {
                        gu: hstack(&[&h.u_future, &DMatrix::zeros(mt, p_rho + pt)]),
                        eu: DMatrix::zeros(mt, m1),
                        gy: hstack(&[&h.y_future, &DMatrix::zeros(pt, p_rho), &(-DMatrix::identity(pt, pt))]),
                        ey: DMatrix::zeros(pt, m1),
                        penalty: diag_penalty(&[(n, bar_lambda_alpha), (p_rho + pt, lambda_sigma)]),
                        equalities,
                    },
                    Context::Window,
                )
            }
            SchemeConfig::ElasticNet { lambda1, lambda2 } => {
                // x = α with the exact data equation Z_P α = z_init.
                let off_span = DMatrix::identity(n, n) - pd.pi();
                if lambda1 > 0.0 {
                    l1 = Some((lambda1, DMatrix::identity(n, n)));
                }
                settings = alpha_settings();
                (
                    AffineMaps {
                        gu: h.u_future.clone(),
                        eu: DMatrix::zeros(mt, m1),
                        gy: h.y_future.clone(),
                        ey: DMatrix::zeros(pt, m1),
                        penalty: off_span * (2.0 * lambda2),
                        equalities: vec![EqualityRows {
                            a: h.z_past.clone(),
                            b0: DVector::zeros(m1),
                            bc: DMatrix::identity(m1, m1),
                        }],
                    },
                    Context::Window,
                )
            }
        };
        Ok(Self {
            scheme,
            spec: spec.clone(),
            pd: Some(pd),
            context,
            qp: AffineQp::new(spec, maps, l1, settings)?,
        })
    }

    pub fn scheme(&self) -> SchemeConfig {
        self.scheme
    }

    pub fn spec(&self) -> &ControlSpec {
        &self.spec
    }

    /// Size of the QP solved at every step.
    pub fn n_decision(&self) -> usize {
        self.qp.n_vars()
    }

    pub fn step(&mut self, meas: Measurement<'_>) -> Result<ControlStep> {
        let c = match (&self.context, meas) {
            (Context::State, Measurement::State(x)) => x.clone(),
            (Context::Window, Measurement::Window(init)) => init.z_init.clone(),
            (Context::Gamma1, Measurement::Window(init)) => {
                solve_gamma1(self.pd.expect("data-driven controller"), init)?
            }
            _ => {
                return Err(DdpcError::Invalid(format!(
                    "{} cannot be driven by this kind of measurement",
                    self.scheme.name()
                )))
            }
        };
        if let Measurement::Window(init) = meas {
            let want = (self.spec.m_inputs() + self.spec.p_outputs()) * self.spec.rho;
            if init.len() != want {
                return Err(DdpcError::shape(
                    "Controller::step",
                    format!("z_init has {} entries, expected {want}", init.len()),
                ));
            }
        }
        let sol = self.qp.solve(&c)?;
        if sol.status != QpStatus::Optimal {
            return Err(DdpcError::Solver {
                scheme: self.scheme.to_string(),
                status: sol.status,
            });
        }
        let (u_plan, y_plan) = self.qp.plans(&sol.x, &c);
        let mut extras = self.extras(&sol.x, &c);
        extras.insert("plan_cost".into(), self.spec.plan_cost(&u_plan, &y_plan));
        Ok(ControlStep {
            u_first: u_plan.rows(0, self.spec.m_inputs()).into_owned(),
            u_plan,
            y_plan,
            solver: SolverStats::from_solution(&sol, self.qp.n_vars()),
            extras,
        })
    }

    fn extras(&self, x: &DVector<f64>, _c: &DVector<f64>) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let Some(pd) = self.pd else { return out };
        let n = pd.n_cols();
        let (m1, mt, pt) = (pd.lq.l11.nrows(), pd.lq.l22.nrows(), pd.lq.l33.nrows());
        match self.scheme {
            SchemeConfig::GammaDdpc | SchemeConfig::GammaDdpcBeta { .. } => {
                out.insert("gamma2_norm".into(), x.norm());
            }
            SchemeConfig::GammaThreeEta { .. } => {
                out.insert("gamma2_norm".into(), x.rows(0, mt).norm());
                out.insert("gamma3_norm".into(), x.rows(mt, pt).norm());
            }
            SchemeConfig::SpcSlack { .. } => {
                out.insert("sigma_norm".into(), x.rows(0, m1).norm());
            }
            SchemeConfig::Berberich { .. } => {
                let alpha = x.rows(0, n);
                out.insert("alpha_norm".into(), alpha.norm());
                out.insert("alpha_l1".into(), alpha.lp_norm(1));
                out.insert("sigma_norm".into(), x.rows(n, x.len() - n).norm());
            }
            SchemeConfig::ElasticNet { .. } => {
                let alpha = x.rows(0, n).into_owned();
                let w = pd.hankel.past_and_inputs();
                let in_span = pd.data_pinv() * (&w * &alpha);
                out.insert("alpha_norm".into(), alpha.norm());
                out.insert("alpha_l1".into(), alpha.lp_norm(1));
                out.insert("alpha_off_span_norm".into(), (&alpha - in_span).norm());
            }
            SchemeConfig::Spc | SchemeConfig::OracleMpc => {}
        }
        out
    }
}

/// One oracle step from the state estimate `x_hat`.
pub fn oracle_mpc_step(sys: &LinearSystem, spec: &ControlSpec, x_hat: &DVector<f64>) -> Result<ControlStep> {
    Controller::oracle(sys, spec)?.step(Measurement::State(x_hat))
}

fn one_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition, scheme: SchemeConfig) -> Result<ControlStep> {
    Controller::data_driven(pd, spec, scheme)?.step(Measurement::Window(init))
}

/// Subspace predictive control with the projected predictor.
pub fn spc_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::Spc)
}

pub fn spc_slack_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition, lambda: f64) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::SpcSlack { lambda })
}

pub fn berberich_step(
    pd: &PredictorData,
    spec: &ControlSpec,
    init: &InitialCondition,
    bar_lambda_alpha: f64,
    lambda_sigma: f64,
    null_output_slack: bool,
) -> Result<ControlStep> {
    one_step(
        pd,
        spec,
        init,
        SchemeConfig::Berberich {
            bar_lambda_alpha,
            lambda_sigma,
            null_output_slack,
        },
    )
}

pub fn elastic_net_step(
    pd: &PredictorData,
    spec: &ControlSpec,
    init: &InitialCondition,
    lambda1: f64,
    lambda2: f64,
) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::ElasticNet { lambda1, lambda2 })
}

pub fn gamma_ddpc_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::GammaDdpc)
}

pub fn gamma_ddpc_beta_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition, beta: f64) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::GammaDdpcBeta { beta })
}

pub fn gamma_three_eta_step(pd: &PredictorData, spec: &ControlSpec, init: &InitialCondition, eta: f64) -> Result<ControlStep> {
    one_step(pd, spec, init, SchemeConfig::GammaThreeEta { eta })
}

#[cfg(test)]
mod tests;
