//! Encoder/controller realization of an optimal covariance schedule.
//!
//! Given optimal posterior covariances, the encoder SNR at each step is
//! `snr^F = P⁻¹ − P_pred⁻¹ − snr^Y`, factored as `DᵀM⁻¹D` with the convention
//! `M = I` (scaling folded into `D`; rate and cost depend only on `snr^F`).
//! The controller is the certainty-equivalence gain on the stacked-filter
//! estimate. Stationary policies carry a closed-loop certificate:
//! `ρ(A − ΞH) < 1` for the innovation-form observer matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kalman::{self, CovarianceSchedule};
use crate::linalg;
use crate::lqr::{GainSchedule, StationaryGains};
use crate::model::{CostModel, Horizon, SystemModel};
use crate::sdp::OptimalCovariances;
use crate::{Error, Result};

/// Encoder SNR from optimal covariances: `P_post⁻¹ − P_pred⁻¹ − snr^Y`,
/// clipped to PSD.
///
/// `p_pred` is `A P_{t-1|t-1} Aᵀ + W` for `t ≥ 2` and `P_{1|0}` at `t = 1`
/// (the stationary case uses `A P Aᵀ + W`). Eigenvalues in
/// `[−1e-7·scale, 0)` are attributed to solver tolerance and clipped;
/// anything below `−1e-5·scale` means the covariances violate feasibility.
pub fn snr_f_from_p(
    p_post: &DMatrix<f64>,
    p_pred: &DMatrix<f64>,
    snr_y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let post_inv = linalg::pd_inverse(p_post, "posterior covariance")?;
    let pred_inv = linalg::pd_inverse(p_pred, "predicted covariance")?;
    let raw = linalg::sym(&(post_inv.clone() - pred_inv - snr_y));
    let scale = post_inv.amax().max(1.0);
    let (vals, vecs) = linalg::sym_eigen(&raw);
    if vals[0] < -1e-5 * scale {
        return Err(Error::Inconsistent(format!(
            "snr^F eigenvalue {:.3e} below -1e-5·scale: covariances violate the observation LMI",
            vals[0]
        )));
    }
    // Eigenvalue dust of either sign is zeroed. The floor is sized so that
    // removing a channel perturbs the realized posterior fixed point by less
    // than 1e-9 relative, which keeps the assembly residual check intact.
    let floor = 1e-9 / (1.0 + p_post.amax());
    let floored = DMatrix::from_diagonal(&vals.map(|v| if v <= floor { 0.0 } else { v }));
    Ok(linalg::sym(&(&vecs * floored * vecs.transpose())))
}

/// Rank threshold for dropping channel dimensions, relative to the largest
/// eigenvalue. Lower it to keep weak channels.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Factor `snr^F = DᵀM⁻¹D` with `M = I_q`, `q = rank(snr^F)`.
///
/// Symmetric eigendecomposition; eigenvalues above `RANK_THRESHOLD·λmax`
/// survive, `D = Λ₊^{1/2} U₊ᵀ`.
pub fn factor_snr(snr_f: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = snr_f.nrows();
    let (vals, vecs) = linalg::sym_eigen(snr_f);
    let lmax = vals[n.saturating_sub(1)].max(0.0);
    let kept: Vec<usize> = (0..n)
        .filter(|&i| vals[i] > RANK_THRESHOLD * lmax && vals[i] > 0.0)
        .collect();
    let q = kept.len();
    let mut d = DMatrix::zeros(q, n);
    for (r, &i) in kept.iter().enumerate() {
        d.set_row(r, &(vecs.column(i).transpose() * vals[i].sqrt()));
    }
    (d, DMatrix::identity(q, q))
}

/// Which horizon a policy runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Finite,
    Stationary,
}

/// A realizable closed-loop policy: encoder `f_t = D_t x_t + m_t`,
/// controller `u_t = −K_t x̂_t`, stacked Kalman gains.
///
/// Sequences have length `T` in finite mode and length 1 in stationary mode.
#[derive(Debug, Clone)]
pub struct Policy {
    pub mode: PolicyMode,
    /// Encoder matrices, `q_t × n` (possibly 0 rows: encoder silent).
    pub d: Vec<DMatrix<f64>>,
    /// Encoder noise covariances (identity by convention).
    pub m: Vec<DMatrix<f64>>,
    /// Controller gains.
    pub k: Vec<DMatrix<f64>>,
    /// Stacked Kalman gains `n × (p + q_t)`.
    pub l: Vec<DMatrix<f64>>,
    /// Posterior covariances the policy realizes.
    pub post: Vec<DMatrix<f64>>,
    /// Predicted covariances (`P_{t|t-1}`).
    pub pred: Vec<DMatrix<f64>>,
    /// Total rate over the horizon (finite) or per step (stationary), nats.
    pub rate_nats: f64,
    /// Budget-side cost the schedule predicts.
    pub predicted_cost: f64,
    /// `ρ(A − ΞH)` for stationary policies.
    pub spectral_radius: Option<f64>,
}

impl Policy {
    /// Channel dimensions per step.
    pub fn ranks(&self) -> Vec<usize> {
        self.d.iter().map(|d| d.nrows()).collect()
    }
}

/// Gains input for [`assemble`].
pub enum Gains<'a> {
    Finite(&'a GainSchedule),
    Stationary(&'a StationaryGains),
}

/// Build the policy that realizes optimal covariances.
///
/// Stationary mode verifies the joint-filter fixed point (relative residual
/// ≤ 1e-8) and the closed-loop spectral radius; failure of either indicates
/// the solver tolerance was too loose for synthesis.
pub fn assemble(
    model: &SystemModel,
    gains: Gains<'_>,
    covariances: &OptimalCovariances,
) -> Result<Policy> {
    match (gains, covariances) {
        (Gains::Finite(g), OptimalCovariances::Finite(sched)) => assemble_finite(model, g, sched),
        (Gains::Stationary(g), OptimalCovariances::Stationary { post, plus, pred }) => {
            assemble_stationary(model, g, post, plus, pred)
        }
        _ => Err(Error::Unsupported(
            "gains and covariances disagree on the horizon".into(),
        )),
    }
}

fn assemble_finite(
    model: &SystemModel,
    gains: &GainSchedule,
    sched: &CovarianceSchedule,
) -> Result<Policy> {
    let steps = sched.len();
    if gains.s.len() != steps {
        return Err(Error::Validation(
            "gain schedule and covariance schedule lengths differ".into(),
        ));
    }
    let mut d = Vec::with_capacity(steps);
    let mut m = Vec::with_capacity(steps);
    let mut l = Vec::with_capacity(steps);
    for t in 0..steps {
        let snr_y = model.snr_y(t)?;
        let snr_f = snr_f_from_p(&sched.post[t], &sched.pred[t], &snr_y)?;
        let (dt, mt) = factor_snr(&snr_f);
        let (h, ncov) = kalman::stack_measurements(model.c(t), model.v(t), &dt, &mt);
        l.push(kalman::kalman_gain(&sched.pred[t], &h, &ncov)?);
        d.push(dt);
        m.push(mt);
    }
    let mut predicted_cost = (gains.phi1.transpose() * model.p_init()).trace();
    for t in 0..steps {
        predicted_cost += (gains.theta[t].transpose() * &sched.post[t]).trace()
            + (gains.s[t].transpose() * model.w(t)).trace();
    }
    Ok(Policy {
        mode: PolicyMode::Finite,
        d,
        m,
        k: gains.k.clone(),
        l,
        post: sched.post.clone(),
        pred: sched.pred.clone(),
        rate_nats: kalman::directed_info_nats(sched),
        predicted_cost,
        spectral_radius: None,
    })
}

fn assemble_stationary(
    model: &SystemModel,
    gains: &StationaryGains,
    post: &DMatrix<f64>,
    plus: &DMatrix<f64>,
    pred: &DMatrix<f64>,
) -> Result<Policy> {
    let a = model.a(0);
    let snr_y = model.snr_y(0)?;
    let snr_f = snr_f_from_p(post, pred, &snr_y)?;
    let (d, m) = factor_snr(&snr_f);
    let (h, ncov) = kalman::stack_measurements(model.c(0), model.v(0), &d, &m);
    let gain = kalman::kalman_gain(pred, &h, &ncov)?;

    // joint-filter fixed point: post == incorporate(pred | y and f)
    let joint_snr = linalg::sym(&(&snr_y + &snr_f));
    let realized = kalman::incorporate(pred, &joint_snr)?;
    let residual = (&realized - post).amax() / (1.0 + post.amax());
    if residual > 1e-8 {
        return Err(Error::Inconsistent(format!(
            "stationary covariance is not a filter fixed point (residual {residual:.3e}); \
             solver tolerance too loose"
        )));
    }
    let xi = a * &gain;
    let closed_loop = a - &xi * &h;
    let rho = linalg::spectral_radius(&closed_loop);
    if rho >= 1.0 {
        return Err(Error::Inconsistent(format!(
            "closed-loop filter unstable: ρ(A − ΞH) = {rho:.6}"
        )));
    }
    let predicted_cost = (gains.thetabar.transpose() * post).trace()
        + (gains.sbar.transpose() * model.w(0)).trace();
    // a silent encoder (q = 0) consumes exactly nothing
    let rate_nats = if d.nrows() == 0 {
        0.0
    } else {
        kalman::step_info_nats(plus, post)
    };
    Ok(Policy {
        mode: PolicyMode::Stationary,
        d: vec![d],
        m: vec![m],
        k: vec![gains.kbar.clone()],
        l: vec![gain],
        post: vec![post.clone()],
        pred: vec![pred.clone()],
        rate_nats,
        predicted_cost,
        spectral_radius: Some(rho),
    })
}

// ---------------------------------------------------------------------------
// JSON export
// ---------------------------------------------------------------------------

type Mat = Vec<Vec<f64>>;

fn mat_to_rows(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_mat(rows: &Mat, what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialized policy plus the instance it controls, so a policy file is
/// self-contained for simulation.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    pub mode: String,
    pub n: usize,
    pub m_inputs: usize,
    pub p_outputs: usize,
    /// Channel dimensions per step.
    pub q_ranks: Vec<usize>,
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub c: Vec<Mat>,
    pub w: Vec<Mat>,
    pub v: Vec<Mat>,
    pub p_init: Mat,
    pub q_cost: Vec<Mat>,
    pub r_cost: Vec<Mat>,
    pub encoder_d: Vec<Mat>,
    pub encoder_m: Vec<Mat>,
    pub controller_k: Vec<Mat>,
    pub kalman_l: Vec<Mat>,
    pub posterior_covariance: Vec<Mat>,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub predicted_cost: f64,
    pub stability_spectral_radius: Option<f64>,
}

fn seq_to_rows(steps: usize, f: impl Fn(usize) -> DMatrix<f64>) -> Vec<Mat> {
    (0..steps).map(|t| mat_to_rows(&f(t))).collect()
}

/// Package a policy with its instance for the policy-file schema.
pub fn export_policy(model: &SystemModel, cost: &CostModel, policy: &Policy) -> PolicyFile {
    let steps = match policy.mode {
        PolicyMode::Finite => policy.d.len(),
        PolicyMode::Stationary => 1,
    };
    PolicyFile {
        mode: match policy.mode {
            PolicyMode::Finite => "finite".into(),
            PolicyMode::Stationary => "stationary".into(),
        },
        n: model.n(),
        m_inputs: model.m(),
        p_outputs: model.p(),
        q_ranks: policy.ranks(),
        a: seq_to_rows(steps, |t| model.a(t).clone()),
        b: seq_to_rows(steps, |t| model.b(t).clone()),
        c: seq_to_rows(steps, |t| model.c(t).clone()),
        w: seq_to_rows(steps, |t| model.w(t).clone()),
        v: seq_to_rows(steps, |t| model.v(t).clone()),
        p_init: mat_to_rows(model.p_init()),
        q_cost: seq_to_rows(steps, |t| cost.q(t).clone()),
        r_cost: seq_to_rows(steps, |t| cost.r(t).clone()),
        encoder_d: policy.d.iter().map(mat_to_rows).collect(),
        encoder_m: policy.m.iter().map(mat_to_rows).collect(),
        controller_k: policy.k.iter().map(mat_to_rows).collect(),
        kalman_l: policy.l.iter().map(mat_to_rows).collect(),
        posterior_covariance: policy.post.iter().map(mat_to_rows).collect(),
        rate_nats: policy.rate_nats,
        rate_bits: policy.rate_nats / std::f64::consts::LN_2,
        predicted_cost: policy.predicted_cost,
        stability_spectral_radius: policy.spectral_radius,
    }
}

/// Rebuild `(model, cost, policy)` from a policy file.
pub fn import_policy(file: &PolicyFile) -> Result<(SystemModel, CostModel, Policy)> {
    let mode = match file.mode.as_str() {
        "finite" => PolicyMode::Finite,
        "stationary" => PolicyMode::Stationary,
        other => {
            return Err(Error::Validation(format!(
                "policy mode {other:?} (want \"finite\" or \"stationary\")"
            )))
        }
    };
    let steps = file.encoder_d.len();
    let horizon = match mode {
        PolicyMode::Finite => Horizon::Finite(steps),
        PolicyMode::Stationary => Horizon::Infinite,
    };
    let conv = |mats: &Vec<Mat>, what: &str| -> Result<Vec<DMatrix<f64>>> {
        mats.iter().map(|m| rows_to_mat(m, what)).collect()
    };
    // a 0-row matrix serializes as [] and loses its column count
    let widen_empty = |mats: Vec<DMatrix<f64>>, ncols: usize| -> Vec<DMatrix<f64>> {
        mats.into_iter()
            .map(|m| {
                if m.nrows() == 0 {
                    DMatrix::zeros(0, ncols)
                } else {
                    m
                }
            })
            .collect()
    };
    let model = SystemModel::new(
        horizon,
        conv(&file.a, "a")?,
        conv(&file.b, "b")?,
        widen_empty(conv(&file.c, "c")?, file.n),
        conv(&file.w, "w")?,
        conv(&file.v, "v")?,
        rows_to_mat(&file.p_init, "p_init")?,
    )?;
    let cost = CostModel::new(conv(&file.q_cost, "q_cost")?, conv(&file.r_cost, "r_cost")?, 1.0)?;
    let d = widen_empty(conv(&file.encoder_d, "encoder_d")?, file.n);
    let pred = {
        // reconstruct predictions from the posterior schedule
        let post = conv(&file.posterior_covariance, "posterior_covariance")?;
        let mut pred = Vec::with_capacity(post.len());
        match mode {
            PolicyMode::Finite => {
                let mut p = model.p_init().clone();
                for (t, po) in post.iter().enumerate() {
                    pred.push(p.clone());
                    p = kalman::predict(po, model.a(t), model.w(t));
                }
            }
            PolicyMode::Stationary => {
                pred.push(kalman::predict(&post[0], model.a(0), model.w(0)));
            }
        }
        pred
    };
    let policy = Policy {
        mode,
        d,
        m: conv(&file.encoder_m, "encoder_m")?,
        k: conv(&file.controller_k, "controller_k")?,
        l: conv(&file.kalman_l, "kalman_l")?,
        post: conv(&file.posterior_covariance, "posterior_covariance")?,
        pred,
        rate_nats: file.rate_nats,
        predicted_cost: file.predicted_cost,
        spectral_radius: file.stability_spectral_radius,
    };
    Ok((model, cost, policy))
}
