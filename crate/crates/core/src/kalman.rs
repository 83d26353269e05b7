//! Kalman covariance algebra with two independent measurements.
//!
//! The controller fuses a free observation `y_t = C x_t + v_t` with a paid
//! transmission `f_t = D x_t + m_t`. Three covariances track one time step:
//!
//! * `P_{t|t-1}` — before any measurement at `t` (prediction),
//! * `P⁺_{t|t-1}` — after `y_t` only,
//! * `P_{t|t}`   — after both `y_t` and `f_t`.
//!
//! The per-step communication charge is `½(log det P⁺ − log det P_post)`
//! nats: the covariance reduction attributable to `f_t` alone. Nats are used
//! internally everywhere; conversion to bits happens at output boundaries.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::{Error, Result};

/// SNR (information) matrix `HᵀN⁻¹H` of a measurement `Hx + noise(N)`.
///
/// `p = 0` (no measurement) yields the `n×n` zero matrix.
pub fn snr_matrix(h: &DMatrix<f64>, n_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.ncols();
    if h.nrows() == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let n_inv_h = linalg::pd_solve(n_cov, h, "measurement noise covariance")?;
    Ok(linalg::sym(&(h.transpose() * n_inv_h)))
}

/// Measurement update in information form: `(P⁻¹ + snr)⁻¹`.
///
/// For PD `P` the information form is used directly. A singular `P` falls
/// back to the downdate `P − PDᵀ(DPDᵀ + I)⁻¹DP` with `snr = DᵀD`, which
/// needs no inverse of `P`. The result is symmetric and `⪯ P`.
pub fn incorporate(p: &DMatrix<f64>, snr: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if snr.amax() == 0.0 {
        return Ok(p.clone());
    }
    if let Some(chol) = linalg::sym(p).cholesky() {
        let info = linalg::sym(&(chol.inverse() + snr));
        if let Some(c2) = info.clone().cholesky() {
            return Ok(linalg::sym(&c2.inverse()));
        }
    }
    // snr = DᵀD with M = I; keep only nonzero eigendirections.
    let (vals, vecs) = linalg::sym_eigen(snr);
    let scale = vals[n - 1].max(0.0);
    let kept: Vec<usize> = (0..n).filter(|&i| vals[i] > 1e-14 * scale.max(1.0)).collect();
    if kept.is_empty() {
        return Ok(p.clone());
    }
    let mut d = DMatrix::zeros(kept.len(), n);
    for (r, &i) in kept.iter().enumerate() {
        d.set_row(r, &(vecs.column(i).transpose() * vals[i].sqrt()));
    }
    let dp = &d * p;
    let s = linalg::sym(&(&dp * d.transpose())) + DMatrix::identity(kept.len(), kept.len());
    let gain = linalg::pd_solve(&s, &dp, "innovation covariance")?;
    Ok(linalg::sym(&(p - dp.transpose() * gain)))
}

/// Time update `A P Aᵀ + W`.
pub fn predict(p_post: &DMatrix<f64>, a: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::sym(&(a * p_post * a.transpose() + w))
}

/// Error-covariance sequences of one closed-loop run.
#[derive(Debug, Clone)]
pub struct CovarianceSchedule {
    /// `P_{t|t-1}`
    pub pred: Vec<DMatrix<f64>>,
    /// `P⁺_{t|t-1}` (after `y_t` only)
    pub plus: Vec<DMatrix<f64>>,
    /// `P_{t|t}` (after `y_t` and `f_t`)
    pub post: Vec<DMatrix<f64>>,
}

impl CovarianceSchedule {
    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }
}

/// One step of rate accounting: `½(log det P⁺ − log det P_post)` nats.
pub fn step_info_nats(plus: &DMatrix<f64>, post: &DMatrix<f64>) -> f64 {
    0.5 * (linalg::ln_det_floored(plus) - linalg::ln_det_floored(post))
}

/// Total conditional directed information of a schedule, in nats.
///
/// Equals `½ Σ log det(I + P⁺_{t|t-1} snr^F_t)` for the policy that produced
/// the schedule; always ≥ 0 for a schedule with `P_post ⪯ P⁺`.
pub fn directed_info_nats(schedule: &CovarianceSchedule) -> f64 {
    schedule
        .plus
        .iter()
        .zip(&schedule.post)
        .map(|(pl, po)| step_info_nats(pl, po))
        .sum()
}

/// Filter mean and the gain that produced it.
#[derive(Debug, Clone)]
pub struct FilterState {
    /// Posterior mean `x̂_{t|t}`.
    pub xhat: DVector<f64>,
    /// Stacked-measurement Kalman gain `L_t`, `n×(p+q)`.
    pub gain: DMatrix<f64>,
}

impl FilterState {
    /// Start at the prior mean (zero).
    pub fn origin(n: usize) -> Self {
        Self {
            xhat: DVector::zeros(n),
            gain: DMatrix::zeros(n, 0),
        }
    }
}

/// Stacked-measurement Kalman gain `L = P Hᵀ (H P Hᵀ + N)⁻¹`.
pub fn kalman_gain(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    n_cov: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if h.nrows() == 0 {
        return Ok(DMatrix::zeros(p_pred.nrows(), 0));
    }
    let hp = h * p_pred;
    let s = linalg::sym(&(&hp * h.transpose())) + n_cov;
    if !linalg::is_pd(&s, 1e-14) {
        return Err(Error::Singular("innovation covariance".into()));
    }
    let gain_t = linalg::pd_solve(&s, &hp, "innovation covariance")?;
    Ok(gain_t.transpose())
}

/// One two-stage filter step.
///
/// Predicts `x̂_{t|t-1} = A x̂_{t-1} + B u_{t-1}`, then corrects with the
/// stacked innovation `z − H x̂_{t|t-1}` where `z = [y_t; f_t]`,
/// `H = [C; D]` and `N = blkdiag(V, M)`.
#[allow(clippy::too_many_arguments)]
pub fn filter_step(
    state: &FilterState,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    n_cov: &DMatrix<f64>,
    z: &DVector<f64>,
    u_prev: &DVector<f64>,
) -> Result<FilterState> {
    let xpred = a * &state.xhat + b * u_prev;
    let gain = kalman_gain(p_pred, h, n_cov)?;
    let xhat = if h.nrows() == 0 {
        xpred
    } else {
        &xpred + &gain * (z - h * &xpred)
    };
    Ok(FilterState { xhat, gain })
}

/// Stack `[C; D]` and `blkdiag(V, M)` for the joint update.
pub fn stack_measurements(
    c: &DMatrix<f64>,
    v: &DMatrix<f64>,
    d: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p, q) = (c.nrows(), d.nrows());
    let n = c.ncols().max(d.ncols());
    let mut h = DMatrix::zeros(p + q, n);
    let mut ncov = DMatrix::zeros(p + q, p + q);
    h.view_mut((0, 0), (p, n)).copy_from(c);
    h.view_mut((p, 0), (q, n)).copy_from(d);
    ncov.view_mut((0, 0), (p, p)).copy_from(v);
    ncov.view_mut((p, p), (q, q)).copy_from(m);
    (h, ncov)
}

/// Forward covariance recursion for fixed per-step encoder SNR matrices.
///
/// `snr_f(t)` supplies `snr^F_t` (0-based `t`); the y-side SNR comes from the
/// model. Starts at `P_{1|0} = P_init`.
pub fn forward_schedule(
    model: &crate::model::SystemModel,
    steps: usize,
    mut snr_f: impl FnMut(usize) -> DMatrix<f64>,
) -> Result<CovarianceSchedule> {
    let mut pred = Vec::with_capacity(steps);
    let mut plus = Vec::with_capacity(steps);
    let mut post = Vec::with_capacity(steps);
    let mut p = model.p_init().clone();
    for t in 0..steps {
        let snr_y = model.snr_y(t)?;
        let pl = incorporate(&p, &snr_y)?;
        let po = incorporate(&pl, &snr_f(t))?;
        pred.push(p.clone());
        plus.push(pl);
        post.push(po.clone());
        p = predict(&po, model.a(t), model.w(t));
    }
    Ok(CovarianceSchedule { pred, plus, post })
}

/// Outcome of a stationary forward recursion.
pub enum Stationary {
    /// Converged posterior covariance.
    Converged(DMatrix<f64>),
    /// Trace exceeded the divergence bound (undetectable unstable modes).
    Diverged,
    /// Iteration cap hit without meeting the tolerance.
    Undecided(DMatrix<f64>),
}

/// Fixed point of `P ↦ incorporate(incorporate(A P Aᵀ + W, snr_y), snr_f)`.
///
/// Iterates from `W`, capped at `max_iter`, with a divergence guard at
/// `tr(P) > 1e9 · max(1, tr(W))`.
pub fn stationary_posterior(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    snr_y: &DMatrix<f64>,
    snr_f: &DMatrix<f64>,
    max_iter: usize,
) -> Result<Stationary> {
    let mut p = w.clone();
    let bound = 1e9 * w.trace().max(1.0);
    for _ in 0..max_iter {
        let m = predict(&p, a, w);
        let next = incorporate(&incorporate(&m, snr_y)?, snr_f)?;
        let delta = (&next - &p).amax();
        let scale = 1.0 + p.amax();
        p = next;
        if delta <= 1e-13 * scale {
            return Ok(Stationary::Converged(p));
        }
        if p.trace() > bound {
            return Ok(Stationary::Diverged);
        }
    }
    Ok(Stationary::Undecided(p))
}
