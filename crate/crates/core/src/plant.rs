//! Innovation-form LTI plant: simulation, open-loop data generation and the
//! benchmark system used throughout the experiments.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DdpcError, Result};
use crate::linalg::numerical_rank;
use crate::rng::{rng_from_seed, Rng};

/// `x(t+1) = A x + B u + K e`, `y = C x + D u + e`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
    lambda_max: f64,
}

impl LinearSystem {
    /// Validates dimensions, minimality of `(A, B, C)` and strict stability
    /// of `A - K C`.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        let ok = a.is_square()
            && n > 0
            && m > 0
            && p > 0
            && b.nrows() == n
            && c.ncols() == n
            && d.shape() == (p, m)
            && k.shape() == (n, p);
        if !ok {
            return Err(DdpcError::shape(
                "LinearSystem::new",
                format!(
                    "A {:?}, B {:?}, C {:?}, D {:?}, K {:?}",
                    a.shape(),
                    b.shape(),
                    c.shape(),
                    d.shape(),
                    k.shape()
                ),
            ));
        }

        let mut ctrb = DMatrix::zeros(n, n * m);
        let mut obsv = DMatrix::zeros(n * p, n);
        let mut ak_b = b.clone();
        let mut c_ak = c.clone();
        for i in 0..n {
            ctrb.view_mut((0, i * m), (n, m)).copy_from(&ak_b);
            obsv.view_mut((i * p, 0), (p, n)).copy_from(&c_ak);
            ak_b = &a * ak_b;
            c_ak *= &a;
        }
        if numerical_rank(&ctrb) < n {
            return Err(DdpcError::NotMinimal("(A, B) not reachable"));
        }
        if numerical_rank(&obsv) < n {
            return Err(DdpcError::NotMinimal("(A, C) not observable"));
        }

        let lambda_max = spectral_radius(&(&a - &k * &c));
        if lambda_max >= 1.0 {
            return Err(DdpcError::UnstablePredictor { radius: lambda_max });
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            k,
            lambda_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn p_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Spectral radius of `A - K C`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `‖(A - K C)^ρ‖₂`, the truncation error of a length-`ρ` past window.
    pub fn past_truncation_norm(&self, rho: usize) -> f64 {
        let f = &self.a - &self.k * &self.c;
        let mut pow = DMatrix::identity(self.n_states(), self.n_states());
        for _ in 0..rho {
            pow = &pow * &f;
        }
        pow.singular_values().max()
    }

    /// One step of the innovation form; returns `(y(t), x(t+1))`.
    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        e: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let y = &self.c * x + &self.d * u + e;
        let x_next = &self.a * x + &self.b * u + &self.k * e;
        (y, x_next)
    }

    /// Extended observability matrix `[C; CA; …; CA^{T-1}]`.
    pub fn observability(&self, horizon: usize) -> DMatrix<f64> {
        let (n, p) = (self.n_states(), self.p_outputs());
        let mut gamma = DMatrix::zeros(p * horizon, n);
        let mut c_ak = self.c.clone();
        for i in 0..horizon {
            gamma.view_mut((i * p, 0), (p, n)).copy_from(&c_ak);
            c_ak *= &self.a;
        }
        gamma
    }

    /// Block-Toeplitz matrix of Markov parameters `D, CB, CAB, …`.
    pub fn input_toeplitz(&self, horizon: usize) -> DMatrix<f64> {
        let (m, p) = (self.m_inputs(), self.p_outputs());
        let mut markov = Vec::with_capacity(horizon);
        markov.push(self.d.clone());
        let mut ak_b = self.b.clone();
        for _ in 1..horizon {
            markov.push(&self.c * &ak_b);
            ak_b = &self.a * ak_b;
        }
        let mut h = DMatrix::zeros(p * horizon, m * horizon);
        for i in 0..horizon {
            for j in 0..=i {
                h.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
            }
        }
        h
    }

    /// Stationary output variances (summed over channels) driven by unit
    /// white input and unit white innovation respectively.
    fn unit_gains(&self) -> Result<(f64, f64)> {
        if spectral_radius(&self.a) >= 1.0 {
            return Err(DdpcError::Invalid(
                "stationary variances need a strictly stable A".into(),
            ));
        }
        let mut input = self.d.norm_squared();
        let mut noise = self.p_outputs() as f64;
        let mut ak_b = self.b.clone();
        let mut ak_k = self.k.clone();
        for _ in 0..1_000_000 {
            let hb = (&self.c * &ak_b).norm_squared();
            let hk = (&self.c * &ak_k).norm_squared();
            input += hb;
            noise += hk;
            if hb <= 1e-18 * input && hk <= 1e-18 * noise {
                break;
            }
            ak_b = &self.a * ak_b;
            ak_k = &self.a * ak_k;
        }
        Ok((input, noise))
    }

    /// Innovation standard deviation that yields `snr_db` when the plant is
    /// driven by white input of variance `input_var`.
    pub fn innovation_std_for_snr(&self, input_var: f64, snr_db: f64) -> Result<f64> {
        let (g_in, g_noise) = self.unit_gains()?;
        let ratio = 10f64.powf(snr_db / 10.0);
        Ok((input_var * g_in / (g_noise * ratio)).sqrt())
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Input/output record, channels in rows and time in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub e: Option<DMatrix<f64>>,
}

impl TrajectoryBatch {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>, e: Option<DMatrix<f64>>) -> Result<Self> {
        let len = u.ncols();
        if len == 0 || y.ncols() != len || e.as_ref().is_some_and(|e| e.ncols() != len) {
            return Err(DdpcError::shape(
                "TrajectoryBatch",
                format!("u has {} samples, y has {}", len, y.ncols()),
            ));
        }
        if e.as_ref().is_some_and(|e| e.nrows() != y.nrows()) {
            return Err(DdpcError::shape("TrajectoryBatch", "e and y channel counts differ"));
        }
        Ok(Self { u, y, e })
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m_inputs(&self) -> usize {
        self.u.nrows()
    }

    pub fn p_outputs(&self) -> usize {
        self.y.nrows()
    }

    /// Writes `t, u_1..u_m, y_1..y_p[, e_1..e_p]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m_inputs()).map(|i| format!("u_{i}")));
        header.extend((1..=self.p_outputs()).map(|i| format!("y_{i}")));
        if self.e.is_some() {
            header.extend((1..=self.p_outputs()).map(|i| format!("e_{i}")));
        }
        wr.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![t.to_string()];
            row.extend(self.u.column(t).iter().map(|v| v.to_string()));
            row.extend(self.y.column(t).iter().map(|v| v.to_string()));
            if let Some(e) = &self.e {
                row.extend(e.column(t).iter().map(|v| v.to_string()));
            }
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| DdpcError::io("<csv>", e))?;
        Ok(())
    }

    /// Reads the layout produced by [`TrajectoryBatch::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let cols_with = |prefix: &str| -> Vec<usize> {
            header
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with(prefix))
                .map(|(i, _)| i)
                .collect()
        };
        let (ui, yi, ei) = (cols_with("u_"), cols_with("y_"), cols_with("e_"));
        if ui.is_empty() || yi.is_empty() {
            return Err(DdpcError::Invalid("trajectory CSV needs u_* and y_* columns".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| DdpcError::Invalid(format!("bad number `{s}` in trajectory CSV")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(vals);
        }
        let take = |idx: &[usize]| DMatrix::from_fn(idx.len(), rows.len(), |c, t| rows[t][idx[c]]);
        let e = (!ei.is_empty()).then(|| take(&ei));
        Self::new(take(&ui), take(&yi), e)
    }
}

/// Zero-mean Gaussian innovation with a seeded generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub innovation_std: f64,
    pub seed: u64,
}

/// Training excitation: i.i.d. uniform on `[-amplitude, amplitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSpec {
    pub amplitude: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self { amplitude: 5.0 }
    }
}

impl ExcitationSpec {
    pub fn variance(&self) -> f64 {
        self.amplitude * self.amplitude / 3.0
    }

    pub fn sample(&self, m: usize, len: usize, rng: &mut Rng) -> DMatrix<f64> {
        let a = self.amplitude;
        DMatrix::from_fn(m, len, |_, _| if a > 0.0 { rng.random_range(-a..a) } else { 0.0 })
    }
}

/// Draws a `p × len` block of i.i.d. `N(0, std²)` innovations.
pub fn gaussian_noise(p: usize, len: usize, std: f64, rng: &mut Rng) -> DMatrix<f64> {
    // Column-major fill keeps the draw order time-major.
    DMatrix::from_fn(p, len, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

fn check_sim_args(sys: &LinearSystem, x0: &DVector<f64>, u: &DMatrix<f64>) -> Result<()> {
    if x0.len() != sys.n_states() || u.nrows() != sys.m_inputs() {
        return Err(DdpcError::shape(
            "simulate",
            format!(
                "x0 has {} entries, u has {} channels; system is n={} m={}",
                x0.len(),
                u.nrows(),
                sys.n_states(),
                sys.m_inputs()
            ),
        ));
    }
    if u.ncols() == 0 {
        return Err(DdpcError::Invalid("empty input sequence".into()));
    }
    Ok(())
}

fn run(sys: &LinearSystem, x0: &DVector<f64>, u: &DMatrix<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
    let len = u.ncols();
    let mut y = DMatrix::zeros(sys.p_outputs(), len);
    let mut x = x0.clone();
    for t in 0..len {
        let (yt, xn) = sys.step(&x, &u.column(t).into_owned(), &e.column(t).into_owned());
        y.set_column(t, &yt);
        x = xn;
    }
    y
}

/// Simulates the plant with innovations drawn from `rng`.
pub fn simulate_with_rng(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &DMatrix<f64>,
    innovation_std: f64,
    rng: &mut Rng,
) -> Result<TrajectoryBatch> {
    check_sim_args(sys, x0, u)?;
    if !(innovation_std >= 0.0) {
        return Err(DdpcError::Invalid(format!("innovation_std {innovation_std} < 0")));
    }
    let e = gaussian_noise(sys.p_outputs(), u.ncols(), innovation_std, rng);
    let y = run(sys, x0, u, &e);
    TrajectoryBatch::new(u.clone(), y, Some(e))
}

pub fn simulate(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &DMatrix<f64>,
    noise: &NoiseSpec,
) -> Result<TrajectoryBatch> {
    let mut rng = rng_from_seed(noise.seed);
    simulate_with_rng(sys, x0, u, noise.innovation_std, &mut rng)
}

/// Noise-free output of the conditional-mean system.
pub fn deterministic_response(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_sim_args(sys, x0, u)?;
    let e = DMatrix::zeros(sys.p_outputs(), u.ncols());
    Ok(run(sys, x0, u, &e))
}

/// Benchmark plant with a random stabilising innovation gain.
pub fn benchmark_system(seed: u64) -> Result<LinearSystem> {
    const MAX_DRAWS: usize = 1000;
    let a = DMatrix::from_row_slice(2, 2, &[0.7326, -0.0861, 0.1722, 0.9909]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0609, 0.0064]);
    let c = DMatrix::from_row_slice(1, 2, &[0.0, 1.4142]);
    let d = DMatrix::zeros(1, 1);
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_DRAWS {
        let k = DMatrix::from_fn(2, 1, |_, _| StandardNormal.sample(&mut rng));
        if spectral_radius(&(&a - &k * &c)) < 1.0 {
            return LinearSystem::new(a, b, c, d, k);
        }
    }
    Err(DdpcError::GainSamplingExhausted { draws: MAX_DRAWS })
}

/// Empirical SNR in dB: variance of the deterministic output over the
/// variance of the residual `y - y_d`. Noise-free data gives `+∞`.
pub fn measure_snr(batch: &TrajectoryBatch, sys: &LinearSystem, x0: &DVector<f64>) -> Result<f64> {
    let yd = deterministic_response(sys, x0, &batch.u)?;
    let noise = &batch.y - &yd;
    let var = |m: &DMatrix<f64>| -> f64 {
        m.row_iter()
            .map(|r| {
                let mean = r.mean();
                r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64
            })
            .sum()
    };
    let vn = var(&noise);
    if vn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (var(&yd) / vn).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> LinearSystem {
        benchmark_system(11).unwrap()
    }

    #[test]
    fn benchmark_matrices() {
        let s = bench();
        assert_eq!(s.a, DMatrix::from_row_slice(2, 2, &[0.7326, -0.0861, 0.1722, 0.9909]));
        assert_eq!(s.b, DMatrix::from_row_slice(2, 1, &[0.0609, 0.0064]));
        assert_eq!(s.c, DMatrix::from_row_slice(1, 2, &[0.0, 1.4142]));
        assert_eq!(s.d, DMatrix::zeros(1, 1));
        assert!(s.lambda_max() < 1.0);
        assert_eq!(benchmark_system(11).unwrap().k, s.k);
    }

    #[test]
    fn every_benchmark_gain_is_stabilising() {
        for seed in 0..50 {
            let s = benchmark_system(seed).unwrap();
            assert!(spectral_radius(&(&s.a - &s.k * &s.c)) < 1.0);
        }
    }

    #[test]
    fn zero_input_zero_state_gives_zero_output() {
        let s = bench();
        let u = DMatrix::zeros(1, 20);
        let b = simulate(&s, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: 0.0, seed: 1 }).unwrap();
        assert!(b.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_first_sample() {
        let s = bench();
        let mut u = DMatrix::zeros(1, 5);
        u[(0, 0)] = 1.0;
        let y = deterministic_response(&s, &DVector::zeros(2), &u).unwrap();
        assert_eq!(y[(0, 0)], 0.0);
        assert!((y[(0, 1)] - 1.4142 * 0.0064).abs() < 1e-15);
    }

    #[test]
    fn free_response_from_initial_state() {
        let s = bench();
        let y = deterministic_response(&s, &DVector::from_vec(vec![1.0, 1.0]), &DMatrix::zeros(1, 3)).unwrap();
        assert!((y[(0, 0)] - 1.4142).abs() < 1e-15);
    }

    #[test]
    fn noise_free_simulation_matches_deterministic_response() {
        let s = bench();
        let mut rng = rng_from_seed(5);
        let u = ExcitationSpec::default().sample(1, 200, &mut rng);
        let x0 = DVector::from_vec(vec![0.3, -0.2]);
        let b = simulate(&s, &x0, &u, &NoiseSpec { innovation_std: 0.0, seed: 9 }).unwrap();
        assert_eq!(b.y, deterministic_response(&s, &x0, &u).unwrap());
    }

    #[test]
    fn superposition() {
        let s = bench();
        let mut rng = rng_from_seed(6);
        let u1 = ExcitationSpec::default().sample(1, 60, &mut rng);
        let u2 = ExcitationSpec::default().sample(1, 60, &mut rng);
        let x0 = DVector::from_vec(vec![1.0, -1.0]);
        let lhs = deterministic_response(&s, &x0, &(&u1 + &u2)).unwrap();
        let rhs = deterministic_response(&s, &x0, &u1).unwrap()
            + deterministic_response(&s, &DVector::zeros(2), &u2).unwrap();
        assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let s = bench();
        let u = DMatrix::from_element(1, 50, 0.5);
        let n = NoiseSpec { innovation_std: 0.3, seed: 42 };
        assert_eq!(
            simulate(&s, &DVector::zeros(2), &u, &n).unwrap(),
            simulate(&s, &DVector::zeros(2), &u, &n).unwrap()
        );
    }

    #[test]
    fn bounded_over_long_horizon() {
        let s = bench();
        let mut rng = rng_from_seed(8);
        let u = ExcitationSpec::default().sample(1, 10_000, &mut rng);
        let b = simulate(&s, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: 1.0, seed: 3 }).unwrap();
        assert!(b.y.iter().all(|v| v.is_finite() && v.abs() < 1e3));
    }

    #[test]
    fn snr_of_noise_free_batch_is_infinite() {
        let s = bench();
        let u = DMatrix::from_element(1, 30, 1.0);
        let b = simulate(&s, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: 0.0, seed: 0 }).unwrap();
        assert_eq!(measure_snr(&b, &s, &DVector::zeros(2)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn doubling_noise_costs_six_db() {
        let s = bench();
        let mut rng = rng_from_seed(21);
        let u = ExcitationSpec::default().sample(1, 100_000, &mut rng);
        let x0 = DVector::zeros(2);
        let a = simulate(&s, &x0, &u, &NoiseSpec { innovation_std: 0.1, seed: 1 }).unwrap();
        let b = simulate(&s, &x0, &u, &NoiseSpec { innovation_std: 0.2, seed: 1 }).unwrap();
        let drop = measure_snr(&a, &s, &x0).unwrap() - measure_snr(&b, &s, &x0).unwrap();
        assert!((drop - 20.0 * 2f64.log10()).abs() < 0.05, "drop {drop}");
    }

    #[test]
    fn calibrated_noise_hits_target_snr() {
        let s = bench();
        let exc = ExcitationSpec::default();
        let std = s.innovation_std_for_snr(exc.variance(), 18.0).unwrap();
        let mut rng = rng_from_seed(2);
        let u = exc.sample(1, 100_000, &mut rng);
        let b = simulate(&s, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: std, seed: 4 }).unwrap();
        let snr = measure_snr(&b, &s, &DVector::zeros(2)).unwrap();
        assert!((snr - 18.0).abs() < 0.2, "snr {snr}");
    }

    #[test]
    fn rejects_non_minimal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = LinearSystem::new(a, b, c, DMatrix::zeros(1, 1), DMatrix::zeros(2, 1));
        assert!(matches!(r, Err(DdpcError::NotMinimal(_))));
    }

    #[test]
    fn csv_round_trip() {
        let s = bench();
        let u = DMatrix::from_fn(1, 12, |_, t| t as f64 * 0.25 - 1.0);
        let b = simulate(&s, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: 0.1, seed: 2 }).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u_1,y_1,e_1\n"));
        assert_eq!(TrajectoryBatch::read_csv(buf.as_slice()).unwrap(), b);
    }
}
