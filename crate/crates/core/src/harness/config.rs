//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! n_data = 1000
//! n_monte_carlo = 30
//! test_length = 50
//! snr_target_db = 18.0      # inf for noise-free data and tests
//! rho = 23                  # or "auto" for the FPE choice
//! horizon = 40
//! q_weight = [[1.0]]
//! r_weight = [[1e-3]]
//!
//! [scheme]
//! kind = "gamma_ddpc_beta"
//! beta = 1e-2
//!
//! [sweep]
//! param = "beta"
//! grid = "1e-4:10:1e4"
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::parse_grid;
use crate::control::{BoxBounds, ControlSpec, SchemeConfig};
use crate::error::{DdpcError, Result};
use crate::horizon::DEFAULT_RHO_RANGE;
use crate::par::Execution;
use crate::plant::ExcitationSpec;

/// Past horizon: fixed, or chosen per run by FPE on the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoChoice {
    Fixed(usize),
    Auto,
}

impl Serialize for RhoChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoChoice::Fixed(r) => s.serialize_u64(*r as u64),
            RhoChoice::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for RhoChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) => Ok(RhoChoice::Fixed(r)),
            Raw::Str(s) if s == "auto" => Ok(RhoChoice::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected an integer or \"auto\", got \"{s}\""))),
        }
    }
}

/// A named parameter and the values it takes, given either as a list or as
/// a grid string (see [`parse_grid`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
}

impl SweepSpec {
    pub fn resolved_values(&self) -> Result<Vec<f64>> {
        let mut out = self.values.clone();
        if let Some(g) = &self.grid {
            out.extend(parse_grid(g)?);
        }
        if out.is_empty() {
            return Err(DdpcError::Config {
                key: "sweep".into(),
                message: "grid is empty".into(),
            });
        }
        Ok(out)
    }
}

fn d_n_data() -> usize {
    1000
}
fn d_n_mc() -> usize {
    30
}
fn d_test_length() -> usize {
    50
}
fn d_snr() -> f64 {
    18.0
}
fn d_rho() -> RhoChoice {
    RhoChoice::Fixed(23)
}
fn d_horizon() -> usize {
    40
}
fn d_q() -> Vec<Vec<f64>> {
    vec![vec![1.0]]
}
fn d_r() -> Vec<Vec<f64>> {
    vec![vec![1e-3]]
}
fn d_zero() -> Vec<f64> {
    vec![0.0]
}
fn d_x0() -> Vec<f64> {
    vec![1.0, 1.0]
}
fn d_amplitude() -> f64 {
    ExcitationSpec::default().amplitude
}
fn d_scheme() -> SchemeConfig {
    SchemeConfig::GammaDdpc
}
fn d_rho_range() -> (usize, usize) {
    DEFAULT_RHO_RANGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_scheme")]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_n_data")]
    pub n_data: usize,
    #[serde(default = "d_n_mc")]
    pub n_monte_carlo: usize,
    #[serde(default = "d_test_length")]
    pub test_length: usize,
    /// SNR of the training and test data; `inf` disables the innovation.
    #[serde(default = "d_snr")]
    pub snr_target_db: f64,
    #[serde(default = "d_rho")]
    pub rho: RhoChoice,
    /// Candidate range for `rho = "auto"`.
    #[serde(default = "d_rho_range")]
    pub rho_range: (usize, usize),
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_q")]
    pub q_weight: Vec<Vec<f64>>,
    #[serde(default = "d_r")]
    pub r_weight: Vec<Vec<f64>>,
    #[serde(default = "d_zero")]
    pub y_ref: Vec<f64>,
    #[serde(default = "d_zero")]
    pub u_ref: Vec<f64>,
    #[serde(default)]
    pub u_box: Option<BoxBounds>,
    #[serde(default)]
    pub y_box: Option<BoxBounds>,
    #[serde(default)]
    pub terminal_constraint: bool,
    /// State at the first closed-loop step.
    #[serde(default = "d_x0")]
    pub x0: Vec<f64>,
    /// Training input is uniform on `[-a, a]`.
    #[serde(default = "d_amplitude")]
    pub excitation_amplitude: f64,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: d_scheme(),
            seed: 0,
            n_data: d_n_data(),
            n_monte_carlo: d_n_mc(),
            test_length: d_test_length(),
            snr_target_db: d_snr(),
            rho: d_rho(),
            rho_range: d_rho_range(),
            horizon: d_horizon(),
            q_weight: d_q(),
            r_weight: d_r(),
            y_ref: d_zero(),
            u_ref: d_zero(),
            u_box: None,
            y_box: None,
            terminal_constraint: false,
            x0: d_x0(),
            excitation_amplitude: d_amplitude(),
            execution: Execution::default(),
            sweep: None,
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> DdpcError {
    DdpcError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn square(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad(key, "must be a nonempty square array of rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            bad(if key == "." { "<root>" } else { &key }, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DdpcError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_monte_carlo == 0 {
            return Err(bad("n_monte_carlo", "must be at least 1"));
        }
        if self.test_length == 0 {
            return Err(bad("test_length", "must be at least 1"));
        }
        if self.snr_target_db.is_nan() {
            return Err(bad("snr_target_db", "must be a number or inf"));
        }
        if !(self.excitation_amplitude > 0.0) || !self.excitation_amplitude.is_finite() {
            return Err(bad("excitation_amplitude", "must be positive"));
        }
        if let RhoChoice::Fixed(0) = self.rho {
            return Err(bad("rho", "must be positive"));
        }
        if self.rho_range.0 == 0 || self.rho_range.0 > self.rho_range.1 {
            return Err(bad("rho_range", "need 1 <= min <= max"));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(bad("x0", "entries must be finite"));
        }
        self.scheme.validate()?;
        self.control_spec(self.rho_range.0)?;
        if let Some(s) = &self.sweep {
            for v in s.resolved_values()? {
                self.with_param(&s.param, v)?;
            }
        }
        Ok(())
    }

    /// Controller specification for a given past horizon.
    pub fn control_spec(&self, rho: usize) -> Result<ControlSpec> {
        let q = square("q_weight", &self.q_weight)?;
        let r = square("r_weight", &self.r_weight)?;
        let (m, p) = (r.nrows(), q.nrows());
        let spec = ControlSpec {
            horizon: self.horizon,
            rho,
            q_weight: q,
            r_weight: r,
            y_ref: DVector::from_vec(self.y_ref.clone()),
            u_ref: DVector::from_vec(self.u_ref.clone()),
            u_box: self.u_box.clone().unwrap_or_else(|| BoxBounds::unbounded(m)),
            y_box: self.y_box.clone().unwrap_or_else(|| BoxBounds::unbounded(p)),
            terminal_constraint: self.terminal_constraint,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn excitation(&self) -> ExcitationSpec {
        ExcitationSpec {
            amplitude: self.excitation_amplitude,
        }
    }

    /// Names accepted by [`with_param`](Self::with_param) besides the
    /// scheme weights.
    pub const SWEEPABLE: [&'static str; 4] = ["n_data", "rho", "snr_target_db", "horizon"];

    /// Copy with one parameter replaced. Integer parameters must be given
    /// as whole numbers.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let whole = || {
            if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
                Ok(value as usize)
            } else {
                Err(bad(name, format!("{value} is not a positive integer")))
            }
        };
        match name {
            "n_data" => out.n_data = whole()?,
            "rho" => out.rho = RhoChoice::Fixed(whole()?),
            "horizon" => out.horizon = whole()?,
            "snr_target_db" => out.snr_target_db = value,
            _ => out.scheme = self.scheme.with_param(name, value)?,
        }
        out.sweep = None;
        Ok(out)
    }

    /// True when changing `name` leaves the oracle closed loop unchanged,
    /// so a baseline can be shared across the grid.
    pub fn param_keeps_oracle(name: &str) -> bool {
        !matches!(name, "snr_target_db" | "horizon")
    }
}
