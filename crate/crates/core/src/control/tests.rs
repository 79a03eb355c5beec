use super::*;
use crate::linalg::build_hankel_set;
use crate::plant::{benchmark_system, simulate, ExcitationSpec, NoiseSpec, TrajectoryBatch};
use crate::predictor::build_predictor;
use crate::rng::rng_from_seed;
use rand::Rng as _;

const RHO: usize = 6;
const T: usize = 12;

fn training(std: f64) -> (LinearSystem, TrajectoryBatch) {
    let sys = benchmark_system(2).unwrap();
    let mut rng = rng_from_seed(21);
    let u = ExcitationSpec::default().sample(1, 400, &mut rng);
    let batch = simulate(&sys, &DVector::zeros(2), &u, &NoiseSpec { innovation_std: std, seed: 8 }).unwrap();
    (sys, batch)
}

fn predictor(std: f64) -> (LinearSystem, PredictorData) {
    let (sys, batch) = training(std);
    (sys, build_predictor(build_hankel_set(&batch, RHO, T).unwrap()).unwrap())
}

/// A past window of the plant started from `x0` under random input, plus the
/// state it ends in.
fn window(sys: &LinearSystem, seed: u64) -> (InitialCondition, DVector<f64>) {
    let mut rng = rng_from_seed(seed);
    let x0 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
    let u = ExcitationSpec { amplitude: 1.0 }.sample(1, RHO, &mut rng);
    let b = simulate(sys, &x0, &u, &NoiseSpec { innovation_std: 0.0, seed: 0 }).unwrap();
    let mut x = x0;
    for t in 0..RHO {
        x = &sys.a * x + &sys.b * b.u.column(t);
    }
    (InitialCondition::from_batch(&b, RHO, RHO).unwrap(), x)
}

fn spec() -> ControlSpec {
    ControlSpec::regulation(1, 1, T, RHO, 1e-3)
}

fn rel_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

#[test]
fn oracle_at_origin_is_idle() {
    let sys = benchmark_system(0).unwrap();
    let s = oracle_mpc_step(&sys, &spec(), &DVector::zeros(2)).unwrap();
    assert!(s.u_plan.amax() < 1e-12);
}

#[test]
fn oracle_matches_normal_equations() {
    let sys = benchmark_system(0).unwrap();
    let x = DVector::from_vec(vec![1.0, -0.5]);
    let s = oracle_mpc_step(&sys, &spec(), &x).unwrap();
    let (g, h) = (sys.observability(T), sys.input_toeplitz(T));
    let lhs = h.tr_mul(&h) + DMatrix::identity(T, T) * 1e-3;
    let want = lhs.lu().solve(&(-h.tr_mul(&(g * x)))).unwrap();
    assert!(rel_gap(&s.u_plan, &want) < 1e-8);
    assert_eq!(s.u_first[0], s.u_plan[0]);
}

#[test]
fn gamma_matches_spc() {
    let (sys, pd) = predictor(0.1);
    for seed in 0..3 {
        let (init, _) = window(&sys, seed);
        let g = gamma_ddpc_step(&pd, &spec(), &init).unwrap();
        let s = spc_step(&pd, &spec(), &init).unwrap();
        assert!(rel_gap(&g.u_plan, &s.u_plan) < 1e-6, "seed {seed}");
        assert_eq!(g.solver.n_variables, T);
    }
}

#[test]
fn vanishing_beta_is_plain_gamma() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 4);
    let g = gamma_ddpc_step(&pd, &spec(), &init).unwrap();
    let b = gamma_ddpc_beta_step(&pd, &spec(), &init, 0.0).unwrap();
    assert!(rel_gap(&b.u_plan, &g.u_plan) < 1e-9);
}

#[test]
fn beta_shrinks_gamma2() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 5);
    let norms: Vec<f64> = [0.0, 1e-3, 1e-1, 1e1, 1e3]
        .iter()
        .map(|&b| gamma_ddpc_beta_step(&pd, &spec(), &init, b).unwrap().extras["gamma2_norm"])
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{norms:?}");
}

#[test]
fn heavy_eta_is_plain_gamma() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 6);
    let g = gamma_ddpc_step(&pd, &spec(), &init).unwrap();
    let e = gamma_three_eta_step(&pd, &spec(), &init, 1e8).unwrap();
    assert!(rel_gap(&e.u_plan, &g.u_plan) < 1e-3);
    assert!(e.extras["gamma3_norm"] < 1e-3);
}

#[test]
fn heavy_slack_penalty_is_spc() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 7);
    let s = spc_step(&pd, &spec(), &init).unwrap();
    let k = spc_slack_step(&pd, &spec(), &init, 1e8).unwrap();
    assert!(rel_gap(&k.u_plan, &s.u_plan) < 1e-3);
}

#[test]
fn slack_shrinks_with_penalty() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 8);
    let norms: Vec<f64> = [1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6]
        .iter()
        .map(|&l| spc_slack_step(&pd, &spec(), &init, l).unwrap().extras["sigma_norm"])
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)), "{norms:?}");
}

#[test]
fn heavy_off_span_penalty_is_spc() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 9);
    let s = spc_step(&pd, &spec(), &init).unwrap();
    let gap = |l2: f64| rel_gap(&elastic_net_step(&pd, &spec(), &init, 0.0, l2).unwrap().u_plan, &s.u_plan);
    // Y_F is not in the span of the data rows, so the gap closes like 1/λ2.
    assert!(gap(1e2) < gap(1.0) && gap(1e4) < gap(1e2));
    let e = elastic_net_step(&pd, &spec(), &init, 0.0, 1e8).unwrap();
    assert!(rel_gap(&e.u_plan, &s.u_plan) < 1e-3, "{}", rel_gap(&e.u_plan, &s.u_plan));
}

#[test]
fn nulled_output_slack_is_terminal_spc() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 10);
    let mut sp = spec();
    sp.terminal_constraint = true;
    let s = spc_step(&pd, &sp, &init).unwrap();
    let b = berberich_step(&pd, &sp, &init, 0.0, 1e8, true).unwrap();
    assert!(rel_gap(&b.u_plan, &s.u_plan) < 1e-3, "{}", rel_gap(&b.u_plan, &s.u_plan));
    // The terminal window is pinned.
    assert!(s.u_plan.rows(T - RHO, RHO).amax() < 1e-7);
    assert!(s.y_plan.rows(T - RHO, RHO).amax() < 1e-7);
}

#[test]
fn unpenalized_slack_absorbs_the_data() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 11);
    let b = berberich_step(&pd, &spec(), &init, 1.0, 0.0, false).unwrap();
    assert!(b.extras["sigma_norm"] > 1e-3);
}

#[test]
fn l1_term_shrinks_alpha() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 12);
    let small = elastic_net_step(&pd, &spec(), &init, 1e-6, 1.0).unwrap();
    let big = elastic_net_step(&pd, &spec(), &init, 1.0, 1.0).unwrap();
    assert!(big.extras["alpha_l1"] <= small.extras["alpha_l1"] + 1e-6);
}

#[test]
fn input_box_is_respected() {
    let (sys, pd) = predictor(0.1);
    let (init, _) = window(&sys, 13);
    let mut sp = spec();
    sp.u_box = BoxBounds::symmetric(0.5, 1);
    sp.y_box = BoxBounds::symmetric(3.0, 1);
    for scheme in [
        SchemeConfig::Spc,
        SchemeConfig::GammaDdpc,
        SchemeConfig::SpcSlack { lambda: 10.0 },
    ] {
        let s = Controller::data_driven(&pd, &sp, scheme)
            .unwrap()
            .step(Measurement::Window(&init))
            .unwrap();
        assert!(sp.u_box.contains(s.u_plan.as_slice(), 1e-6), "{scheme}: {}", s.u_plan.amax());
        assert!(sp.y_box.contains(s.y_plan.as_slice(), 1e-6), "{scheme}");
    }
}

#[test]
fn noise_free_gamma_matches_oracle() {
    let (sys, pd) = predictor(0.0);
    let (init, x) = window(&sys, 14);
    let g = gamma_ddpc_step(&pd, &spec(), &init).unwrap();
    let o = oracle_mpc_step(&sys, &spec(), &x).unwrap();
    assert!((g.u_plan - o.u_plan).amax() < 1e-6);
}

#[test]
fn shifted_reference_shifts_plan() {
    let sys = benchmark_system(0).unwrap();
    let x = DVector::from_vec(vec![0.3, 0.7]);
    let base = oracle_mpc_step(&sys, &spec(), &x).unwrap();
    // Steady state for u_r: y_r = G(1) u_r with D = 0.
    let ur = 0.4;
    let gain = (&sys.c * (DMatrix::identity(2, 2) - &sys.a).try_inverse().unwrap() * &sys.b)[(0, 0)];
    let xs = (DMatrix::identity(2, 2) - &sys.a).try_inverse().unwrap() * &sys.b * ur;
    let mut sp = spec();
    sp.u_ref[0] = ur;
    sp.y_ref[0] = gain * ur;
    let shifted = oracle_mpc_step(&sys, &sp, &(&x + &xs)).unwrap();
    let du = shifted.u_plan.add_scalar(-ur);
    assert!((du - base.u_plan).amax() < 1e-8);
}

#[test]
fn measurement_kind_must_match() {
    let (sys, pd) = predictor(0.1);
    let mut c = Controller::data_driven(&pd, &spec(), SchemeConfig::GammaDdpc).unwrap();
    assert!(c.step(Measurement::State(&DVector::zeros(2))).is_err());
    let mut o = Controller::oracle(&sys, &spec()).unwrap();
    let (init, _) = window(&sys, 1);
    assert!(o.step(Measurement::Window(&init)).is_err());
}

#[test]
fn scheme_tokens() {
    assert_eq!(SchemeConfig::parse_token("spc_slack:1e4").unwrap(), SchemeConfig::SpcSlack { lambda: 1e4 });
    assert_eq!(
        SchemeConfig::parse_token("berberich:0.001:100").unwrap(),
        SchemeConfig::Berberich {
            bar_lambda_alpha: 1e-3,
            lambda_sigma: 100.0,
            null_output_slack: false
        }
    );
    assert_eq!(SchemeConfig::parse_token("gamma_ddpc").unwrap(), SchemeConfig::GammaDdpc);
    assert!(SchemeConfig::parse_token("gamma_ddpc:1").is_err());
    assert!(SchemeConfig::parse_token("spc_slack:-1").is_err());
    assert!(SchemeConfig::parse_token("dmc").is_err());
    let s = SchemeConfig::ElasticNet { lambda1: 0.5, lambda2: 2.0 };
    assert_eq!(SchemeConfig::parse_token(&s.to_string()).unwrap(), s);
}

#[test]
fn spec_validation() {
    let mut s = spec();
    s.r_weight[(0, 0)] = 0.0;
    assert!(s.validate().is_err());
    let mut s = spec();
    s.terminal_constraint = true;
    s.rho = T + 1;
    assert!(s.validate().is_err());
}
