//! Seeded Monte Carlo validation of a synthesized policy.
//!
//! Runs the closed loop `x_{t+1} = A x_t + B u_t + w_t`, `y_t = C x_t + v_t`,
//! `f_t = D x_t + m_t`, `u_t = −K x̂_t` and checks the realized cost,
//! error covariance, and rate against the policy's predictions.
//!
//! Reproducibility contract: identical (model, policy, config) produce a
//! bit-identical [`SimReport`]. Batches are independent trajectories on
//! disjoint RNG substreams, merged in batch order with mergeable
//! (Welford-style) accumulators.

pub mod rng;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kalman::{self, FilterState};
use crate::linalg;
use crate::model::{CostModel, SystemModel};
use crate::synthesis::{Policy, PolicyMode};
use crate::{Error, Result};

use rng::GaussianStream;

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Steps per batch (must equal `T` for finite-horizon policies).
    pub steps: usize,
    /// Steps discarded before statistics start.
    pub burn_in: usize,
    pub seed: u64,
    /// Independent trajectories (standard errors need ≥ 2).
    pub batches: usize,
}

impl SimConfig {
    fn check(&self) -> Result<()> {
        if self.steps == 0 || self.burn_in >= self.steps {
            return Err(Error::Validation(format!(
                "need burn_in < steps (got {} / {})",
                self.burn_in, self.steps
            )));
        }
        if self.batches == 0 {
            return Err(Error::Validation("batches must be >= 1".into()));
        }
        Ok(())
    }
}

/// Empirical results of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    /// Per-step average of `x_{t+1}ᵀQx_{t+1} + u_tᵀRu_t`, post burn-in,
    /// pooled over batches.
    pub empirical_avg_cost: f64,
    /// Standard error over batch means (absent for a single batch).
    pub cost_stderr: Option<f64>,
    pub batch_cost_means: Vec<f64>,
    /// Post-burn-in average of `(x − x̂)(x − x̂)ᵀ`, row-major.
    pub empirical_error_covariance: Vec<Vec<f64>>,
    pub predicted_cost: f64,
    /// Policy's stationary (or final-step) posterior covariance, row-major.
    pub predicted_p: Vec<Vec<f64>>,
    pub state_norm_mean: f64,
    pub state_norm_max: f64,
    /// Largest per-component lag-1 autocorrelation of the innovations.
    pub innovation_lag1_corr: f64,
    /// Channel dimensions of the policy that ran (0 = silent encoder).
    pub encoder_ranks: Vec<usize>,
    pub steps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
}

struct Accumulator {
    count: usize,
    cost_sum: f64,
    err_outer: DMatrix<f64>,
    norm_sum: f64,
    norm_max: f64,
    // lag-1 innovation products per component
    innov_prev: Option<DVector<f64>>,
    innov_xy: DVector<f64>,
    innov_xx: DVector<f64>,
    innov_pairs: usize,
}

impl Accumulator {
    fn new(n: usize, innov_dim: usize) -> Self {
        Self {
            count: 0,
            cost_sum: 0.0,
            err_outer: DMatrix::zeros(n, n),
            norm_sum: 0.0,
            norm_max: 0.0,
            innov_prev: None,
            innov_xy: DVector::zeros(innov_dim),
            innov_xx: DVector::zeros(innov_dim),
            innov_pairs: 0,
        }
    }

    fn merge(&mut self, other: Accumulator) {
        self.count += other.count;
        self.cost_sum += other.cost_sum;
        self.err_outer += other.err_outer;
        self.norm_sum += other.norm_sum;
        self.norm_max = self.norm_max.max(other.norm_max);
        self.innov_xy += other.innov_xy;
        self.innov_xx += other.innov_xx;
        self.innov_pairs += other.innov_pairs;
    }
}

fn policy_step_matrices(
    policy: &Policy,
    t: usize,
) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
    match policy.mode {
        PolicyMode::Stationary => (&policy.d[0], &policy.m[0], &policy.k[0], &policy.pred[0]),
        PolicyMode::Finite => (&policy.d[t], &policy.m[t], &policy.k[t], &policy.pred[t]),
    }
}

fn run_batch(
    model: &SystemModel,
    cost: &CostModel,
    policy: &Policy,
    cfg: &SimConfig,
    batch: usize,
    mut trace: Option<&mut dyn std::io::Write>,
) -> Result<(Accumulator, f64)> {
    let n = model.n();
    let p = model.p();
    let q_max = policy.d.iter().map(|d| d.nrows()).max().unwrap_or(0);
    let base_stream = 4 * batch as u64;
    let mut g_w = GaussianStream::new(cfg.seed, base_stream);
    let mut g_v = GaussianStream::new(cfg.seed, base_stream + 1);
    let mut g_m = GaussianStream::new(cfg.seed, base_stream + 2);
    let mut g_x1 = GaussianStream::new(cfg.seed, base_stream + 3);

    let p_init_sqrt = linalg::psd_sqrt(model.p_init());
    let mut z = DVector::zeros(n);
    g_x1.fill(&mut z);
    let mut x = &p_init_sqrt * z;
    let mut filter = FilterState::origin(n);
    let mut u_prev = DVector::zeros(model.m());
    let mut acc = Accumulator::new(n, p + q_max);
    let mut batch_cost = 0.0;
    let mut batch_steps = 0usize;

    let time_invariant = !model.horizon().is_finite();
    let w_sqrt0 = linalg::psd_sqrt(model.w(0));
    let v_sqrt0 = linalg::psd_sqrt(model.v(0));
    let mut w_noise = DVector::zeros(n);
    for t in 0..cfg.steps {
        let (d, _m_cov, k, p_pred) = policy_step_matrices(policy, t);
        let q = d.nrows();
        let (w_sqrt, v_sqrt) = if time_invariant {
            (w_sqrt0.clone(), v_sqrt0.clone())
        } else {
            (linalg::psd_sqrt(model.w(t)), linalg::psd_sqrt(model.v(t)))
        };

        // measurements
        let mut v_noise = DVector::zeros(p);
        g_v.fill(&mut v_noise);
        let y = model.c(t) * &x + &v_sqrt * v_noise;
        let mut m_noise = DVector::zeros(q);
        g_m.fill(&mut m_noise);
        let f = d * &x + m_noise; // M = I by convention

        // filter + control
        let (h, ncov) =
            kalman::stack_measurements(model.c(t), model.v(t), d, &DMatrix::identity(q, q));
        let mut zvec = DVector::zeros(p + q);
        zvec.rows_mut(0, p).copy_from(&y);
        zvec.rows_mut(p, q).copy_from(&f);
        let next = kalman::filter_step(
            &filter,
            model.a(t.saturating_sub(1)),
            model.b(t.saturating_sub(1)),
            p_pred,
            &h,
            &ncov,
            &zvec,
            &u_prev,
        )?;
        // the prediction step belongs to t-1's dynamics; at t = 0 the prior
        // mean is 0 so A,B choice is irrelevant there
        let u = -(k * &next.xhat);

        // dynamics
        g_w.fill(&mut w_noise);
        let x_next = model.a(t) * &x + model.b(t) * &u + &w_sqrt * &w_noise;
        let step_cost =
            (x_next.transpose() * cost.q(t) * &x_next)[(0, 0)] + (u.transpose() * cost.r(t) * &u)[(0, 0)];

        if x_next.amax() > 1e12 {
            return Err(Error::Numerical(format!(
                "state diverged at step {t} (‖x‖∞ = {:.3e}): unstable policy",
                x_next.amax()
            )));
        }
        if let Some(sink) = trace.as_deref_mut() {
            let xs: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            let us: Vec<String> = u.iter().map(|v| format!("{v}")).collect();
            writeln!(sink, "{t},{},{},{step_cost}", xs.join(","), us.join(","))
                .map_err(Error::Io)?;
        }

        if t >= cfg.burn_in {
            acc.count += 1;
            acc.cost_sum += step_cost;
            batch_cost += step_cost;
            batch_steps += 1;
            let e = &x - &next.xhat;
            acc.err_outer += &e * e.transpose();
            let nx = x.norm();
            acc.norm_sum += nx;
            acc.norm_max = acc.norm_max.max(nx);
            let innov = &zvec - &h * (model.a(t.saturating_sub(1)) * &filter.xhat + model.b(t.saturating_sub(1)) * &u_prev);
            if innov.len() == acc.innov_xx.len() {
                if let Some(prev) = &acc.innov_prev {
                    for i in 0..innov.len() {
                        acc.innov_xy[i] += prev[i] * innov[i];
                    }
                    acc.innov_pairs += 1;
                }
                for i in 0..innov.len() {
                    acc.innov_xx[i] += innov[i] * innov[i];
                }
                acc.innov_prev = Some(innov);
            }
        }

        x = x_next;
        u_prev = u;
        filter = next;
    }
    Ok((acc, batch_cost / batch_steps.max(1) as f64))
}

/// Run the closed loop and report empirical statistics.
///
/// Finite-horizon policies require `steps == T`. Stationary policies need a
/// stability certificate (checked at assembly). Identical inputs give a
/// bit-identical report.
pub fn simulate(
    model: &SystemModel,
    cost: &CostModel,
    policy: &Policy,
    cfg: &SimConfig,
) -> Result<SimReport> {
    simulate_impl(model, cost, policy, cfg, None)
}

/// [`simulate`] with a per-step CSV trace of batch 0
/// (columns: `t, x…, u…, cost_increment`).
pub fn simulate_traced(
    model: &SystemModel,
    cost: &CostModel,
    policy: &Policy,
    cfg: &SimConfig,
    sink: &mut dyn std::io::Write,
) -> Result<SimReport> {
    simulate_impl(model, cost, policy, cfg, Some(sink))
}

fn simulate_impl(
    model: &SystemModel,
    cost: &CostModel,
    policy: &Policy,
    cfg: &SimConfig,
    mut trace: Option<&mut dyn std::io::Write>,
) -> Result<SimReport> {
    cfg.check()?;
    if policy.mode == PolicyMode::Finite && policy.d.len() != cfg.steps {
        return Err(Error::Validation(format!(
            "finite-horizon policy has T = {}, config asks for {} steps",
            policy.d.len(),
            cfg.steps
        )));
    }
    let n = model.n();
    let q_max = policy.d.iter().map(|d| d.nrows()).max().unwrap_or(0);
    let mut total = Accumulator::new(n, model.p() + q_max);
    let mut batch_means = Vec::with_capacity(cfg.batches);
    if let Some(sink) = trace.as_deref_mut() {
        let header: Vec<String> = (0..n)
            .map(|i| format!("x{i}"))
            .chain((0..model.m()).map(|i| format!("u{i}")))
            .collect();
        writeln!(sink, "# trajectory csv v1")?;
        writeln!(sink, "t,{},cost_increment", header.join(","))?;
    }
    for batch in 0..cfg.batches {
        // only batch 0 is traced
        let sink_for_batch = trace.take();
        let (acc, mean) = run_batch(model, cost, policy, cfg, batch, sink_for_batch)?;
        total.merge(acc);
        batch_means.push(mean);
    }
    let count = total.count.max(1) as f64;
    let empirical_avg_cost = total.cost_sum / count;
    let cost_stderr = if cfg.batches >= 2 {
        let mean = batch_means.iter().sum::<f64>() / cfg.batches as f64;
        let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
            / (cfg.batches - 1) as f64;
        Some((var / cfg.batches as f64).sqrt())
    } else {
        None
    };
    let err_cov = &total.err_outer / count;
    let innovation_lag1_corr = (0..total.innov_xx.len())
        .map(|i| {
            if total.innov_xx[i] > 0.0 && total.innov_pairs > 0 {
                (total.innov_xy[i] / total.innov_pairs as f64)
                    / (total.innov_xx[i] / (total.innov_pairs + 1) as f64)
            } else {
                0.0
            }
        })
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let predicted_p = policy.post.last().expect("policy has covariances");
    let predicted_cost = match policy.mode {
        PolicyMode::Stationary => policy.predicted_cost,
        PolicyMode::Finite => policy.predicted_cost / policy.d.len() as f64,
    };
    Ok(SimReport {
        empirical_avg_cost,
        cost_stderr,
        batch_cost_means: batch_means,
        empirical_error_covariance: (0..n)
            .map(|i| (0..n).map(|j| err_cov[(i, j)]).collect())
            .collect(),
        predicted_cost,
        predicted_p: (0..n)
            .map(|i| (0..n).map(|j| predicted_p[(i, j)]).collect())
            .collect(),
        state_norm_mean: total.norm_sum / count,
        state_norm_max: total.norm_max,
        innovation_lag1_corr,
        encoder_ranks: policy.ranks(),
        steps: cfg.steps,
        burn_in: cfg.burn_in,
        batches: cfg.batches,
        seed: cfg.seed,
    })
}

/// Per-step rate of a stationary policy along its own covariance recursion.
///
/// Iterates the forward recursion from `P_init` to convergence (cap 10⁴
/// sweeps) and evaluates `½ log det(I + P⁺ snr^F)` there.
pub fn empirical_rate(model: &SystemModel, policy: &Policy) -> Result<f64> {
    if policy.mode != PolicyMode::Stationary {
        return Err(Error::Unsupported(
            "empirical_rate applies to stationary policies".into(),
        ));
    }
    let snr_y = model.snr_y(0)?;
    let snr_f = kalman::snr_matrix(&policy.d[0], &policy.m[0])?;
    let mut p = model.p_init().clone();
    let mut converged = false;
    for _ in 0..10_000 {
        let plus = kalman::incorporate(&p, &snr_y)?;
        let post = kalman::incorporate(&plus, &snr_f)?;
        let next = kalman::predict(&post, model.a(0), model.w(0));
        let delta = (&next - &p).amax();
        let scale = 1.0 + p.amax();
        p = next;
        if delta <= 1e-12 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "forward covariance recursion did not converge in 10000 steps".into(),
        ));
    }
    let plus = kalman::incorporate(&p, &snr_y)?;
    let post = kalman::incorporate(&plus, &snr_f)?;
    Ok(kalman::step_info_nats(&plus, &post))
}
