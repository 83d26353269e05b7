//! Property checks of the covariance algebra on randomized instances.

use nalgebra::DMatrix;
use proptest::prelude::*;
use ratelqg::kalman;
use ratelqg::linalg;
use ratelqg::sim::rng::CounterRng;

/// Deterministic random matrix with entries in [-1, 1].
fn rand_matrix(rng: &mut CounterRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| 2.0 * rng.next_f64() - 1.0)
}

/// Random PD matrix `G Gᵀ + εI`.
fn rand_pd(rng: &mut CounterRng, n: usize) -> DMatrix<f64> {
    let g = rand_matrix(rng, n, n);
    linalg::sym(&(&g * g.transpose())) + DMatrix::identity(n, n) * 0.1
}

/// Random PSD matrix of rank ≤ r.
fn rand_psd(rng: &mut CounterRng, n: usize, r: usize) -> DMatrix<f64> {
    let g = rand_matrix(rng, r, n);
    linalg::sym(&(g.transpose() * g))
}

proptest! {
    #[test]
    fn information_identity(seed in any::<u64>(), n in 1usize..=5) {
        // ½(log det P⁺ − log det P_post) == ½ log det(I + P⁺ snr^F)
        let mut rng = CounterRng::new(seed, 0);
        let p_plus = rand_pd(&mut rng, n);
        let snr_f = rand_psd(&mut rng, n, n);
        let p_post = kalman::incorporate(&p_plus, &snr_f).unwrap();
        let lhs = kalman::step_info_nats(&p_plus, &p_post);
        let arg = DMatrix::identity(n, n) + &p_plus * &snr_f;
        let rhs = 0.5 * arg.determinant().ln();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()),
            "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn psd_ordering_chain(seed in any::<u64>(), n in 1usize..=5) {
        // P_post ⪯ P_plus ⪯ P_pred, all PSD
        let mut rng = CounterRng::new(seed, 1);
        let p_pred = rand_pd(&mut rng, n);
        let snr_y = rand_psd(&mut rng, n, n.min(3));
        let snr_f = rand_psd(&mut rng, n, n);
        let p_plus = kalman::incorporate(&p_pred, &snr_y).unwrap();
        let p_post = kalman::incorporate(&p_plus, &snr_f).unwrap();
        prop_assert!(linalg::min_eig_sym(&p_post) >= -1e-9);
        prop_assert!(linalg::min_eig_sym(&(&p_plus - &p_post)) >= -1e-9);
        prop_assert!(linalg::min_eig_sym(&(&p_pred - &p_plus)) >= -1e-9);
        // and the paid information is nonnegative
        prop_assert!(kalman::step_info_nats(&p_plus, &p_post) >= -1e-12);
    }

    #[test]
    fn matrix_inversion_lemma_consistency(seed in any::<u64>(), n in 1usize..=5, q in 1usize..=3) {
        // incorporate(P, DᵀM⁻¹D) == P − PDᵀ(DPDᵀ+M)⁻¹DP
        let mut rng = CounterRng::new(seed, 2);
        let p = rand_pd(&mut rng, n);
        let d = rand_matrix(&mut rng, q, n);
        let m = rand_pd(&mut rng, q);
        let snr = kalman::snr_matrix(&d, &m).unwrap();
        let via_info = kalman::incorporate(&p, &snr).unwrap();
        let dp = &d * &p;
        let s = linalg::sym(&(&dp * d.transpose())) + &m;
        let downdate = &p - dp.transpose() * s.clone().cholesky().unwrap().solve(&dp);
        prop_assert!((via_info - downdate).amax() <= 1e-9 * (1.0 + p.amax()));
    }

    #[test]
    fn joint_gain_matches_sequential(seed in any::<u64>(), n in 1usize..=4) {
        // stacked-gain posterior equals y-then-f incorporation
        let mut rng = CounterRng::new(seed, 3);
        let p = rand_pd(&mut rng, n);
        let c = rand_matrix(&mut rng, 2.min(n), n);
        let v = rand_pd(&mut rng, 2.min(n));
        let d = rand_matrix(&mut rng, 1, n);
        let m = rand_pd(&mut rng, 1);
        let snr_y = kalman::snr_matrix(&c, &v).unwrap();
        let snr_f = kalman::snr_matrix(&d, &m).unwrap();
        let seq = kalman::incorporate(&kalman::incorporate(&p, &snr_y).unwrap(), &snr_f).unwrap();
        let (h, ncov) = kalman::stack_measurements(&c, &v, &d, &m);
        let gain = kalman::kalman_gain(&p, &h, &ncov).unwrap();
        let joint = linalg::sym(&(&p - &gain * h * &p));
        prop_assert!((seq - joint).amax() <= 1e-9 * (1.0 + p.amax()));
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]
    #[test]
    fn predict_monte_carlo_consistency(seed in any::<u64>()) {
        // predict() agrees with the sample covariance of Ax + w
        use ratelqg::sim::rng::GaussianStream;
        let mut rng = CounterRng::new(seed, 4);
        let n = 3;
        let a = rand_matrix(&mut rng, n, n);
        let p = rand_pd(&mut rng, n);
        let w = rand_pd(&mut rng, n);
        let want = kalman::predict(&p, &a, &w);
        let p_sqrt = linalg::psd_sqrt(&p);
        let w_sqrt = linalg::psd_sqrt(&w);
        let mut gx = GaussianStream::new(seed, 10);
        let mut gw = GaussianStream::new(seed, 11);
        let trials = 200_000;
        let mut acc = DMatrix::zeros(n, n);
        let mut zx = nalgebra::DVector::zeros(n);
        let mut zw = nalgebra::DVector::zeros(n);
        for _ in 0..trials {
            gx.fill(&mut zx);
            gw.fill(&mut zw);
            let y = &a * (&p_sqrt * &zx) + &w_sqrt * &zw;
            acc += &y * y.transpose();
        }
        acc /= trials as f64;
        let rel = (acc - &want).amax() / want.amax();
        prop_assert!(rel < 0.05, "MC relative error {rel}");
    }
}
