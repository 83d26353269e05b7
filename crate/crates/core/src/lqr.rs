//! Controller gains: backward Riccati recursion and the stabilizing DARE
//! solution.
//!
//! The gains are independent of the measurement structure; they only see
//! `(A, B, Q, R)`. Besides the gains `K_t` the recursion yields the
//! cost-sensitivity matrices `Θ_t` and `Φ₁` that price estimation error in
//! the budget constraint: the achievable cost is
//! `Tr(Φ₁ P_{1|0}) + Σ_t [Tr(Θ_t P_{t|t}) + Tr(S_t W_t)]`.

use nalgebra::DMatrix;

use crate::linalg;
use crate::model::{CostModel, SystemModel};
use crate::{Error, Result};

/// Output of the finite-horizon backward recursion (1-based step `t` lives at
/// index `t-1`).
#[derive(Debug, Clone)]
pub struct GainSchedule {
    /// Value matrices `S_t`, with `S_T = Q_T`.
    pub s: Vec<DMatrix<f64>>,
    /// Control gains `K_t = (B_tᵀS_tB_t + R_t)⁻¹ B_tᵀS_tA_t`.
    pub k: Vec<DMatrix<f64>>,
    /// `Θ_t = K_tᵀ(B_tᵀS_tB_t + R_t)K_t`.
    pub theta: Vec<DMatrix<f64>>,
    /// `Φ₁ = A₁ᵀS₁A₁ − Θ₁`: the price of initial uncertainty.
    pub phi1: DMatrix<f64>,
}

/// Stationary gains from the DARE.
#[derive(Debug, Clone)]
pub struct StationaryGains {
    pub sbar: DMatrix<f64>,
    pub kbar: DMatrix<f64>,
    pub thetabar: DMatrix<f64>,
}

fn gain_at(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    // G = BᵀSB + R is PD for R PD and S PSD.
    let g = linalg::sym(&(b.transpose() * s * b + r));
    let (ev, _) = linalg::sym_eigen(&g);
    if ev[0] <= 1e-14 * ev[ev.len() - 1].max(1.0) {
        return Err(Error::Numerical(format!(
            "BᵀSB + R ill-conditioned (min eig {:.3e})",
            ev[0]
        )));
    }
    let k = linalg::pd_solve(&g, &(b.transpose() * s * a), "BᵀSB + R")?;
    let theta = linalg::sym(&(k.transpose() * &g * &k));
    Ok((k, theta))
}

/// Backward Riccati recursion over `T` steps with terminal value `S_T = Q_T`.
pub fn backward_riccati(model: &SystemModel, cost: &CostModel, horizon: usize) -> Result<GainSchedule> {
    if horizon == 0 {
        return Err(Error::Validation("horizon T must be >= 1".into()));
    }
    let t_end = horizon;
    let mut s = vec![DMatrix::zeros(0, 0); t_end];
    let mut k = vec![DMatrix::zeros(0, 0); t_end];
    let mut theta = vec![DMatrix::zeros(0, 0); t_end];
    s[t_end - 1] = cost.q(t_end - 1).clone();
    for t in (1..=t_end).rev() {
        let (a, b, r) = (model.a(t - 1), model.b(t - 1), cost.r(t - 1));
        let (kt, th) = gain_at(a, b, r, &s[t - 1])?;
        if t > 1 {
            s[t - 2] =
                linalg::sym(&(a.transpose() * &s[t - 1] * a - &th + cost.q(t - 2)));
        }
        k[t - 1] = kt;
        theta[t - 1] = th;
    }
    let a1 = model.a(0);
    let phi1 = linalg::sym(&(a1.transpose() * &s[0] * a1 - &theta[0]));
    Ok(GainSchedule { s, k, theta, phi1 })
}

const DARE_REL_TOL: f64 = 1e-12;
const DARE_MAX_ITER: usize = 100_000;

/// DARE residual `‖AᵀSA − S − AᵀSB(BᵀSB+R)⁻¹BᵀSA + Q‖∞`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> f64 {
    let g = linalg::sym(&(b.transpose() * s * b + r));
    let bsa = b.transpose() * s * a;
    let correction = match linalg::pd_solve(&g, &bsa, "BᵀSB + R") {
        Ok(x) => bsa.transpose() * x,
        Err(_) => return f64::INFINITY,
    };
    (a.transpose() * s * a - s - correction + q).amax()
}

/// Unique stabilizing solution of the discrete algebraic Riccati equation,
/// by fixed-point iteration of the backward recursion from `S = Q`.
///
/// Preconditions (checked by PBH rank tests): `(A, B)` stabilizable and
/// `(A, Q^{1/2})` has no unobservable eigenvalue with `|λ| ≥ 1 − 1e-8`.
pub fn solve_dare(model: &SystemModel, cost: &CostModel) -> Result<StationaryGains> {
    let (a, b, q, r) = (model.a(0), model.b(0), cost.q(0), cost.r(0));
    let near_unstable = |l: &nalgebra::Complex<f64>| l.norm() >= 1.0 - 1e-8;
    if let Some(lam) = linalg::pbh_controllable_at(a, b, near_unstable) {
        return Err(Error::InfeasibleStructure(format!(
            "(A,B) not stabilizable: PBH rank test failed at eigenvalue {:.6}+{:.6}i",
            lam.re, lam.im
        )));
    }
    let q_sqrt = linalg::psd_sqrt(q);
    if let Some(lam) = linalg::pbh_observable_at(a, &q_sqrt, near_unstable) {
        return Err(Error::InfeasibleStructure(format!(
            "(A,Q^1/2) unobservable at eigenvalue {:.6}+{:.6}i (|λ| ≥ 1)",
            lam.re, lam.im
        )));
    }
    let mut s = q.clone();
    let mut converged = false;
    for _ in 0..DARE_MAX_ITER {
        let (_, th) = gain_at(a, b, r, &s)?;
        let next = linalg::sym(&(a.transpose() * &s * a - th + q));
        let delta = (&next - &s).amax();
        let scale = 1.0 + s.amax();
        s = next;
        if delta <= DARE_REL_TOL * scale {
            converged = true;
            break;
        }
    }
    let residual = dare_residual(a, b, q, r, &s);
    if !converged {
        return Err(Error::Numerical(format!(
            "DARE iteration did not converge in {DARE_MAX_ITER} iterations (residual {residual:.3e})"
        )));
    }
    if residual > 1e-9 * (1.0 + s.amax()) {
        return Err(Error::Numerical(format!(
            "DARE residual {residual:.3e} exceeds tolerance"
        )));
    }
    let (kbar, thetabar) = gain_at(a, b, r, &s)?;
    let rho = linalg::spectral_radius(&(a - b * &kbar));
    if rho >= 1.0 {
        return Err(Error::Numerical(format!(
            "DARE fixed point is not stabilizing: ρ(A−BK) = {rho:.6}"
        )));
    }
    Ok(StationaryGains {
        sbar: s,
        kbar,
        thetabar,
    })
}
