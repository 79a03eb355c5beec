//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use ddpc::linalg::build_hankel_set;
use ddpc::plant::{benchmark_system, simulate_with_rng, ExcitationSpec, LinearSystem, TrajectoryBatch};
use ddpc::predictor::{build_predictor, InitialCondition, PredictorData};
use ddpc::qp::QpProblem;
use ddpc::rng::{rng_from_seed, Rng as ChaRng};

pub const BENCH_SNR_DB: f64 = 18.0;

/// Benchmark plant and a training batch of uniform `[-5, 5]` input.
pub fn training(seed: u64, n_data: usize, snr_db: Option<f64>) -> (LinearSystem, TrajectoryBatch, f64) {
    let sys = benchmark_system(seed).unwrap();
    let exc = ExcitationSpec::default();
    let std = match snr_db {
        Some(s) => sys.innovation_std_for_snr(exc.variance(), s).unwrap(),
        None => 0.0,
    };
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let u = exc.sample(1, n_data, &mut rng);
    let batch = simulate_with_rng(&sys, &DVector::zeros(2), &u, std, &mut rng).unwrap();
    (sys, batch, std)
}

pub fn predictor(batch: &TrajectoryBatch, rho: usize, horizon: usize) -> PredictorData {
    build_predictor(build_hankel_set(batch, rho, horizon).unwrap()).unwrap()
}

/// A past window of `rho` samples from a random state under random input,
/// with innovations of standard deviation `std`, and the state it ends in.
pub fn window(
    sys: &LinearSystem,
    rho: usize,
    std: f64,
    rng: &mut ChaRng,
) -> (InitialCondition, DVector<f64>) {
    let x0 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
    let u = ExcitationSpec { amplitude: 1.0 }.sample(1, rho, rng);
    let b = simulate_with_rng(sys, &x0, &u, std, rng).unwrap();
    let e = b.e.as_ref().unwrap();
    let mut x = x0;
    for t in 0..rho {
        x = &sys.a * x + &sys.b * b.u.column(t) + &sys.k * e.column(t);
    }
    (InitialCondition::from_batch(&b, rho, rho).unwrap(), x)
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let d = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let h = &q * DMatrix::from_diagonal(&d) * q.transpose();
    0.5 * (&h + h.transpose())
}

/// Small random QP with a known feasible point.
pub fn random_qp(rng: &mut impl Rng) -> QpProblem {
    let n = rng.random_range(2..=4);
    let n_eq = rng.random_range(0..=1);
    let n_in = rng.random_range(1..=4);
    let h = random_spd(n, 0.1, 5.0, rng);
    let f = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let x_feas = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let a_eq = DMatrix::from_fn(n_eq, n, |_, _| rng.random_range(-1.0..1.0));
    let b_eq = &a_eq * &x_feas;
    let a_in = DMatrix::from_fn(n_in, n, |_, _| rng.random_range(-1.0..1.0));
    let ax = &a_in * &x_feas;
    let lb = DVector::from_fn(n_in, |i, _| {
        if rng.random_bool(0.3) {
            -ddpc::qp::INF
        } else {
            ax[i] - rng.random_range(0.0..0.5)
        }
    });
    let ub = DVector::from_fn(n_in, |i, _| ax[i] + rng.random_range(0.0..0.5));
    QpProblem::new(h, f, a_eq, b_eq, a_in, lb, ub).unwrap()
}

/// Exhaustive active-set oracle for a strictly convex QP: every choice of
/// inactive / at-lower / at-upper per inequality row is solved as an
/// equality-constrained problem, and the best feasible candidate wins.
pub fn active_set_oracle(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.f.len();
    let k = p.a_in.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for code in 0..3usize.pow(k as u32) {
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..p.a_eq.nrows() {
            rows.push(p.a_eq.row(i).transpose());
            rhs.push(p.b_eq[i]);
        }
        let mut c = code;
        let mut skip = false;
        for i in 0..k {
            match c % 3 {
                1 if p.lb[i] > -1e20 => {
                    rows.push(p.a_in.row(i).transpose());
                    rhs.push(p.lb[i]);
                }
                2 => {
                    rows.push(p.a_in.row(i).transpose());
                    rhs.push(p.ub[i]);
                }
                0 => {}
                _ => skip = true,
            }
            c /= 3;
        }
        if skip || rows.len() > n {
            continue;
        }
        let m = rows.len();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        for (j, r) in rows.iter().enumerate() {
            kkt.view_mut((0, n + j), (n, 1)).copy_from(r);
            kkt.view_mut((n + j, 0), (1, n)).copy_from(&r.transpose());
        }
        let mut b = DVector::zeros(n + m);
        b.rows_mut(0, n).copy_from(&(-&p.f));
        for (j, v) in rhs.iter().enumerate() {
            b[n + j] = *v;
        }
        let Some(sol) = kkt.lu().solve(&b) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = (&p.a_eq * &x - &p.b_eq).amax() <= 1e-9 && {
            let ax = &p.a_in * &x;
            (0..k).all(|i| ax[i] >= p.lb[i] - 1e-9 && ax[i] <= p.ub[i] + 1e-9)
        };
        if !feasible {
            continue;
        }
        let obj = 0.5 * x.dot(&(&p.h * &x)) + p.f.dot(&x);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((x, obj));
        }
    }
    best
}
