//! End-to-end pipeline checks on the reference scalar instance:
//! gains → rate program → synthesis → simulation.

use nalgebra::{dmatrix, DMatrix};
use ratelqg::kalman;
use ratelqg::lqr;
use ratelqg::model::{CostModel, SystemModel};
use ratelqg::sdp::{self, OptimalCovariances, SolveStatus, SolverOptions};
use ratelqg::sim::{self, SimConfig};
use ratelqg::synthesis::{self, Gains, PolicyMode};

const RATE_AT_10: f64 = 0.274_735_215_962_020_4;
const P_AT_10: f64 = 0.420_473_174_376_630;
const KBAR: f64 = 1.618_033_988_749_895;
const D_AT_10: f64 = 1.002_697_366_908_838;
const PSTAR: f64 = 0.809_016_994_374_947_4;

fn scalar_model() -> SystemModel {
    SystemModel::time_invariant(
        dmatrix![2.0],
        dmatrix![1.0],
        dmatrix![1.0],
        dmatrix![1.0],
        dmatrix![1.0],
        dmatrix![1.0],
    )
    .unwrap()
}

fn solve_scalar(gamma: f64) -> (SystemModel, CostModel, sdp::SdpSolution, sdp::MaxDetProblem) {
    let model = scalar_model();
    let cost = CostModel::identity(1, 1, gamma);
    let gains = lqr::solve_dare(&model, &cost).unwrap();
    let prob = sdp::build_infinite(&model, &cost, &gains).unwrap();
    let sol = sdp::solve(&prob, &SolverOptions::default()).unwrap();
    (model, cost, sol, prob)
}

fn assemble_scalar(gamma: f64) -> (SystemModel, CostModel, synthesis::Policy, f64) {
    let (model, cost, sol, prob) = solve_scalar(gamma);
    let cov = sdp::extract_policy_covariances(&sol, &prob).unwrap();
    let gains = lqr::solve_dare(&model, &cost).unwrap();
    let policy = synthesis::assemble(&model, Gains::Stationary(&gains), &cov).unwrap();
    (model, cost, policy, sol.objective_nats)
}

#[test]
fn stationary_policy_matches_closed_form() {
    let (_, _, policy, rate) = assemble_scalar(10.0);
    assert_eq!(policy.mode, PolicyMode::Stationary);
    assert!((policy.k[0][(0, 0)] - KBAR).abs() < 1e-9);
    assert_eq!(policy.d[0].nrows(), 1);
    assert!(
        (policy.d[0][(0, 0)].abs() - D_AT_10).abs() < 1e-5,
        "D = {}",
        policy.d[0][(0, 0)]
    );
    assert!((policy.post[0][(0, 0)] - P_AT_10).abs() < 1e-5);
    assert!((policy.rate_nats - RATE_AT_10).abs() < 1e-6);
    assert!((rate - policy.rate_nats).abs() < 1e-6);
    assert!(policy.spectral_radius.unwrap() < 1.0);
    assert!(policy.predicted_cost <= 10.0 + 1e-6);
}

#[test]
fn zero_rate_policy_is_silent() {
    let (_, _, policy, rate) = assemble_scalar(16.0);
    assert_eq!(rate, 0.0);
    assert_eq!(policy.ranks(), vec![0]);
    assert!((policy.post[0][(0, 0)] - PSTAR).abs() < 1e-8);
    assert_eq!(policy.rate_nats, 0.0);
    // controller still runs on y alone and the filter is stable
    assert!(policy.spectral_radius.unwrap() < 1.0);
}

#[test]
fn rate_round_trip_through_induced_schedule() {
    // directed info of the schedule induced by the assembled policy equals
    // the program objective
    let (model, _, policy, rate) = assemble_scalar(10.0);
    let snr_f = kalman::snr_matrix(&policy.d[0], &policy.m[0]).unwrap();
    let sched = kalman::forward_schedule(&model, 300, |_| snr_f.clone()).unwrap();
    let last = sched.len() - 1;
    let step_rate = kalman::step_info_nats(&sched.plus[last], &sched.post[last]);
    assert!(
        (step_rate - rate).abs() < 1e-6,
        "schedule rate {step_rate} vs objective {rate}"
    );
}

#[test]
fn forward_recursion_converges_from_inflated_start() {
    // P_{1|0} ⪰ P: recursion under the stationary (D, M) contracts to P
    let (model, _, policy, _) = assemble_scalar(10.0);
    let snr_f = kalman::snr_matrix(&policy.d[0], &policy.m[0]).unwrap();
    let snr_y = model.snr_y(0).unwrap();
    let mut p = dmatrix![50.0];
    for _ in 0..500 {
        let plus = kalman::incorporate(&p, &snr_y).unwrap();
        let post = kalman::incorporate(&plus, &snr_f).unwrap();
        p = kalman::predict(&post, model.a(0), model.w(0));
    }
    let post = kalman::incorporate(
        &kalman::incorporate(&p, &snr_y).unwrap(),
        &snr_f,
    )
    .unwrap();
    assert!(
        (post[(0, 0)] - P_AT_10).abs() < 1e-9,
        "converged to {}",
        post[(0, 0)]
    );
}

#[test]
fn empirical_rate_matches_objective() {
    let (model, _, policy, rate) = assemble_scalar(10.0);
    let emp = sim::empirical_rate(&model, &policy).unwrap();
    assert!((emp - rate).abs() < 1e-6, "empirical {emp} objective {rate}");
    // scaling snr_y up with the same (D, M) strictly reduces the rate
    let scaled = SystemModel::time_invariant(
        dmatrix![2.0],
        dmatrix![1.0],
        dmatrix![10.0f64.sqrt()],
        dmatrix![1.0],
        dmatrix![1.0],
        dmatrix![1.0],
    )
    .unwrap();
    let emp_hi = sim::empirical_rate(&scaled, &policy).unwrap();
    assert!(emp_hi < emp);
    // a silent policy has zero rate
    let (_, _, silent, _) = assemble_scalar(16.0);
    assert_eq!(sim::empirical_rate(&model, &silent).unwrap(), 0.0);
}

#[test]
fn simulation_validates_predictions() {
    let (model, cost, policy, _) = assemble_scalar(10.0);
    let cfg = SimConfig {
        steps: 60_000,
        burn_in: 1_000,
        seed: 11,
        batches: 4,
    };
    let rep = sim::simulate(&model, &cost, &policy, &cfg).unwrap();
    assert!(
        (rep.empirical_avg_cost - 10.0).abs() / 10.0 < 0.02,
        "cost {}",
        rep.empirical_avg_cost
    );
    assert!(
        (rep.empirical_error_covariance[0][0] - P_AT_10).abs() / P_AT_10 < 0.05,
        "error var {}",
        rep.empirical_error_covariance[0][0]
    );
    // batch consistency: batch means within 3 sigma of the pooled mean
    let stderr = rep.cost_stderr.unwrap();
    let pooled: f64 =
        rep.batch_cost_means.iter().sum::<f64>() / rep.batch_cost_means.len() as f64;
    for m in &rep.batch_cost_means {
        assert!(
            (m - pooled).abs() <= 3.0 * stderr * (cfg.batches as f64).sqrt(),
            "batch mean {m} vs pooled {pooled} (stderr {stderr})"
        );
    }
    // innovation whiteness
    assert!(
        rep.innovation_lag1_corr < 5.0 / (cfg.steps as f64).sqrt(),
        "lag-1 corr {}",
        rep.innovation_lag1_corr
    );
}

#[test]
fn simulation_is_bit_identical() {
    let (model, cost, policy, _) = assemble_scalar(10.0);
    let cfg = SimConfig {
        steps: 5_000,
        burn_in: 100,
        seed: 99,
        batches: 2,
    };
    let a = sim::simulate(&model, &cost, &policy, &cfg).unwrap();
    let b = sim::simulate(&model, &cost, &policy, &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(
        a.empirical_avg_cost.to_bits(),
        b.empirical_avg_cost.to_bits()
    );
}

#[test]
fn noiseless_origin_stays_at_origin() {
    // W = V = 0 and x1 = 0: every state, input and cost stays exactly 0.
    let model = SystemModel::time_invariant(
        dmatrix![0.9],
        dmatrix![1.0],
        DMatrix::zeros(0, 1),
        dmatrix![0.0],
        DMatrix::zeros(0, 0),
        dmatrix![0.0],
    )
    .unwrap();
    let cost = CostModel::identity(1, 1, 1.0);
    let policy = ratelqg::synthesis::Policy {
        mode: PolicyMode::Stationary,
        d: vec![DMatrix::zeros(0, 1)],
        m: vec![DMatrix::zeros(0, 0)],
        k: vec![dmatrix![0.5]],
        l: vec![DMatrix::zeros(1, 0)],
        post: vec![dmatrix![0.0]],
        pred: vec![dmatrix![0.0]],
        rate_nats: 0.0,
        predicted_cost: 0.0,
        spectral_radius: Some(0.9),
    };
    let cfg = SimConfig {
        steps: 200,
        burn_in: 0,
        seed: 3,
        batches: 1,
    };
    let rep = sim::simulate(&model, &cost, &policy, &cfg).unwrap();
    assert_eq!(rep.empirical_avg_cost, 0.0);
    assert_eq!(rep.state_norm_max, 0.0);
}

#[test]
fn unstable_policy_reports_divergence() {
    // zero gain on an unstable plant: the state blows past 1e12
    let model = SystemModel::time_invariant(
        dmatrix![2.0],
        dmatrix![1.0],
        DMatrix::zeros(0, 1),
        dmatrix![1.0],
        DMatrix::zeros(0, 0),
        dmatrix![1.0],
    )
    .unwrap();
    let cost = CostModel::identity(1, 1, 1.0);
    let policy = ratelqg::synthesis::Policy {
        mode: PolicyMode::Stationary,
        d: vec![DMatrix::zeros(0, 1)],
        m: vec![DMatrix::zeros(0, 0)],
        k: vec![dmatrix![0.0]],
        l: vec![DMatrix::zeros(1, 0)],
        post: vec![dmatrix![1.0]],
        pred: vec![dmatrix![5.0]],
        rate_nats: 0.0,
        predicted_cost: f64::INFINITY,
        spectral_radius: Some(2.0),
    };
    let cfg = SimConfig {
        steps: 500,
        burn_in: 0,
        seed: 5,
        batches: 1,
    };
    let err = sim::simulate(&model, &cost, &policy, &cfg).unwrap_err();
    assert!(err.to_string().contains("diverged"), "{err}");
    // and the covariance recursion of such a policy never settles
    let err = sim::empirical_rate(&model, &policy).unwrap_err();
    assert!(err.to_string().contains("converge"), "{err}");
}

#[test]
fn finite_policy_requires_matching_steps() {
    let model = SystemModel::new(
        ratelqg::model::Horizon::Finite(2),
        vec![dmatrix![2.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        dmatrix![1.0],
    )
    .unwrap();
    let cost = CostModel::identity(1, 1, 10.0);
    let gains = lqr::backward_riccati(&model, &cost, 2).unwrap();
    let prob = sdp::build_finite(&model, &cost, &gains).unwrap();
    let sol = sdp::solve(&prob, &SolverOptions::default()).unwrap();
    let cov = sdp::extract_policy_covariances(&sol, &prob).unwrap();
    let policy = synthesis::assemble(&model, Gains::Finite(&gains), &cov).unwrap();
    let bad = SimConfig {
        steps: 5,
        burn_in: 0,
        seed: 1,
        batches: 1,
    };
    assert!(sim::simulate(&model, &cost, &policy, &bad).is_err());
    let good = SimConfig {
        steps: 2,
        burn_in: 0,
        seed: 1,
        batches: 1,
    };
    assert!(sim::simulate(&model, &cost, &policy, &good).is_ok());
}

#[test]
fn finite_zero_rate_policy() {
    // budget above the no-communication cost: every step is silent
    let model = SystemModel::new(
        ratelqg::model::Horizon::Finite(3),
        vec![dmatrix![2.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        dmatrix![1.0],
    )
    .unwrap();
    let cost = CostModel::identity(1, 1, 1.0);
    let bounds = sdp::cost_bounds(&model, &cost).unwrap();
    let cost = cost.with_gamma(bounds.gamma_nocomm + 1.0);
    let gains = lqr::backward_riccati(&model, &cost, 3).unwrap();
    let prob = sdp::build_finite(&model, &cost, &gains).unwrap();
    let sol = sdp::solve(&prob, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::ZeroRate);
    let cov = sdp::extract_policy_covariances(&sol, &prob).unwrap();
    let policy = synthesis::assemble(&model, Gains::Finite(&gains), &cov).unwrap();
    assert_eq!(policy.ranks(), vec![0, 0, 0]);
    assert!(policy.rate_nats.abs() < 1e-12);
}

#[test]
fn policy_file_round_trip() {
    let (model, cost, policy, _) = assemble_scalar(10.0);
    let file = synthesis::export_policy(&model, &cost, &policy);
    let text = serde_json::to_string_pretty(&file).unwrap();
    let parsed: synthesis::PolicyFile = serde_json::from_str(&text).unwrap();
    let (model2, cost2, policy2) = synthesis::import_policy(&parsed).unwrap();
    assert_eq!(model2.n(), 1);
    let cfg = SimConfig {
        steps: 2_000,
        burn_in: 50,
        seed: 7,
        batches: 1,
    };
    let r1 = sim::simulate(&model, &cost, &policy, &cfg).unwrap();
    let r2 = sim::simulate(&model2, &cost2, &policy2, &cfg).unwrap();
    assert_eq!(
        r1.empirical_avg_cost.to_bits(),
        r2.empirical_avg_cost.to_bits()
    );
}

#[test]
fn time_varying_objective_equals_directed_info() {
    // T = 3 with varying A_t, W_t, C_t: the program objective telescopes to
    // the directed information of the extracted schedule only if every step
    // index lines up.
    let model = SystemModel::new(
        ratelqg::model::Horizon::Finite(3),
        vec![dmatrix![2.0], dmatrix![1.4], dmatrix![0.7]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0], dmatrix![0.5], dmatrix![2.0]],
        vec![dmatrix![1.0], dmatrix![2.0], dmatrix![0.5]],
        vec![dmatrix![1.0], dmatrix![1.0], dmatrix![4.0]],
        dmatrix![1.5],
    )
    .unwrap();
    let cost = CostModel::new(
        vec![dmatrix![1.0], dmatrix![2.0], dmatrix![1.0]],
        vec![dmatrix![1.0]],
        1.0,
    )
    .unwrap();
    let bounds = sdp::cost_bounds(&model, &cost).unwrap();
    let cost = cost.with_gamma(0.5 * (bounds.gamma_min + bounds.gamma_nocomm));
    let gains = lqr::backward_riccati(&model, &cost, 3).unwrap();
    let prob = sdp::build_finite(&model, &cost, &gains).unwrap();
    let sol = sdp::solve(&prob, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cov = sdp::extract_policy_covariances(&sol, &prob).unwrap();
    let sched = match &cov {
        OptimalCovariances::Finite(s) => s,
        _ => panic!("finite expected"),
    };
    let di = kalman::directed_info_nats(sched);
    assert!(
        (di - sol.objective_nats).abs() < 1e-6,
        "directed info {di} vs objective {}",
        sol.objective_nats
    );
    // and the assembled policy realizes the same budget-side cost
    let policy = synthesis::assemble(&model, Gains::Finite(&gains), &cov).unwrap();
    assert!(policy.predicted_cost <= cost.gamma + 1e-6);
    assert!((policy.rate_nats - di).abs() < 1e-9);
}

#[test]
fn finite_pipeline_t1() {
    // T=1 produces a one-step policy with a single (D, M) pair
    let model = SystemModel::new(
        ratelqg::model::Horizon::Finite(1),
        vec![dmatrix![2.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        vec![dmatrix![1.0]],
        dmatrix![1.0],
    )
    .unwrap();
    let cost = CostModel::identity(1, 1, 3.8);
    let gains = lqr::backward_riccati(&model, &cost, 1).unwrap();
    let prob = sdp::build_finite(&model, &cost, &gains).unwrap();
    let sol = sdp::solve(&prob, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cov = sdp::extract_policy_covariances(&sol, &prob).unwrap();
    let policy = synthesis::assemble(&model, Gains::Finite(&gains), &cov).unwrap();
    assert_eq!(policy.d.len(), 1);
    assert_eq!(policy.ranks(), vec![1]);
    // P_{1|1} = min((Γ − ΦP10 − S1W)/Θ1, (P10⁻¹+snr)⁻¹) = min(0.4, 0.5)
    match cov {
        OptimalCovariances::Finite(s) => {
            assert!((s.post[0][(0, 0)] - 0.4).abs() < 1e-6)
        }
        _ => panic!("finite expected"),
    }
}
