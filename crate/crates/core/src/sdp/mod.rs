//! Determinant-maximization programs for the minimal communication rate,
//! and a self-contained barrier interior-point solver for them.
//!
//! Both horizons reduce to the same template over symmetric matrix blocks:
//!
//! ```text
//! minimize   constant + Σᵢ wᵢ · (−log det Eᵢ(X))      (Eᵢ affine)
//! subject to Lⱼ(X) ⪰ 0                               (affine LMIs)
//!            budget(X) ≤ Γ                            (one linear inequality)
//! ```
//!
//! The finite-horizon program has blocks `P_{1|1..T|T}` and auxiliary
//! `Π_{1..T-1}` (`Π_T` is aliased to `P_{T|T}`); the infinite-horizon program
//! has a single `(P, Π)` pair and its optimum is the per-step rate in nats.

mod barrier;

use nalgebra::DMatrix;

use crate::kalman::{self, CovarianceSchedule, Stationary};
use crate::linalg;
use crate::lqr::{GainSchedule, StationaryGains};
use crate::model::{Horizon, SystemModel};
use crate::model::CostModel;
use crate::{Error, Result};

/// One congruence term `coeff · G X_b Gᵀ` of an affine expression.
#[derive(Debug, Clone)]
pub struct ExprTerm {
    pub block: usize,
    pub coeff: f64,
    pub g: DMatrix<f64>,
}

/// Affine symmetric-matrix expression `constant + Σ coeffⱼ · Gⱼ X_{bⱼ} Gⱼᵀ`.
#[derive(Debug, Clone)]
pub struct MatrixExpr {
    pub dim: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<ExprTerm>,
}

impl MatrixExpr {
    fn new(constant: DMatrix<f64>) -> Self {
        Self {
            dim: constant.nrows(),
            constant,
            terms: Vec::new(),
        }
    }

    fn term(mut self, block: usize, coeff: f64, g: DMatrix<f64>) -> Self {
        self.terms.push(ExprTerm { block, coeff, g });
        self
    }

    /// Evaluate at the given block values.
    pub fn eval(&self, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut e = self.constant.clone();
        for t in &self.terms {
            e += t.coeff * (&t.g * &blocks[t.block] * t.g.transpose());
        }
        linalg::sym(&e)
    }
}

/// Linear budget `constant + Σ Tr(Cᵢ X_{bᵢ}) ≤ gamma`.
#[derive(Debug, Clone)]
pub struct BudgetConstraint {
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
    pub constant: f64,
    pub gamma: f64,
}

impl BudgetConstraint {
    /// Left-hand side at the given block values.
    pub fn eval(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.constant
            + self
                .coeffs
                .iter()
                .map(|(b, c)| (c.transpose() * &blocks[*b]).trace())
                .sum::<f64>()
    }
}

/// What a decision block means, for extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLabel {
    /// Posterior covariance `P_{t|t}` (0-based step).
    Post(usize),
    /// Auxiliary `Π_t` (0-based step; the last step is aliased to `Post`).
    Aux(usize),
}

/// A rate-minimization program plus the model it came from.
#[derive(Debug, Clone)]
pub struct MaxDetProblem {
    /// Block labels and dimensions.
    pub blocks: Vec<(BlockLabel, usize)>,
    /// Additive objective constant (nats).
    pub obj_constant: f64,
    /// `(weight, expr)` pairs contributing `weight · (−log det expr)`.
    pub obj_terms: Vec<(f64, MatrixExpr)>,
    pub lmis: Vec<MatrixExpr>,
    pub budget: BudgetConstraint,
    /// The system the program was built from (drives the feasible start,
    /// zero-rate detection, and covariance extraction).
    model: SystemModel,
}

/// Solver status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Strictly positive optimal rate found to tolerance.
    Optimal,
    /// The budget is met without communication; rate is exactly 0.
    ZeroRate,
    /// The budget is below the perfect-information cost.
    InfeasibleBudget,
    /// Newton failed to converge within the iteration caps.
    MaxIter,
}

/// Residual diagnostics at the returned point.
#[derive(Debug, Clone, Default)]
pub struct KktReport {
    /// Minimum eigenvalue of each LMI.
    pub lmi_min_eigs: Vec<f64>,
    /// `Γ −` budget left-hand side.
    pub budget_slack: f64,
    /// Final squared Newton decrement / 2.
    pub newton_decrement: f64,
    /// Final barrier parameter τ.
    pub barrier_parameter: f64,
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Decision block values (empty for `InfeasibleBudget`).
    pub blocks: Vec<DMatrix<f64>>,
    /// Optimal value in nats: total over the horizon (finite) or per step
    /// (infinite). `+∞` for `InfeasibleBudget`.
    pub objective_nats: f64,
    pub kkt: KktReport,
    pub newton_iters: usize,
}

/// Solver options (see the CLI `--tol`, `--max-newton`, `--mu-factor` flags).
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Outer stop: barrier parameter count / τ below this.
    pub gap_tol: f64,
    /// Inner stop: squared Newton decrement / 2 below this.
    pub newton_tol: f64,
    /// Newton iteration cap per barrier stage.
    pub max_newton: usize,
    /// τ multiplier per stage.
    pub mu_factor: f64,
    /// Budget-infeasibility margin, relative to `1 + |gamma_min|`.
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            newton_tol: 1e-10,
            max_newton: 400,
            mu_factor: 10.0,
            feas_tol: 1e-9,
        }
    }
}

/// Extracted optimal covariances.
#[derive(Debug, Clone)]
pub enum OptimalCovariances {
    Finite(CovarianceSchedule),
    Stationary {
        post: DMatrix<f64>,
        plus: DMatrix<f64>,
        pred: DMatrix<f64>,
    },
}

/// Cost range of an instance: what communication can and cannot buy.
#[derive(Debug, Clone)]
pub struct CostBounds {
    /// Cost with perfect state information (no budget below this is feasible).
    pub gamma_min: f64,
    /// Cost with the plant observation only (`+∞` if the y-only filter
    /// diverges or does not settle within the iteration cap).
    pub gamma_nocomm: f64,
}

fn require_pd_w(model: &SystemModel, steps: usize) -> Result<()> {
    for t in 0..steps {
        if !linalg::is_pd(model.w(t), 1e-12) {
            return Err(Error::Validation(format!(
                "W[{t}] must be positive definite for the rate program"
            )));
        }
    }
    Ok(())
}

/// `(P⁻¹ + AᵀW⁻¹A)⁻¹`: the auxiliary block's value at the optimum.
fn aux_optimum(p: &DMatrix<f64>, a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let info = linalg::pd_inverse(p, "posterior covariance")?
        + a.transpose() * linalg::pd_solve(w, a, "W")?;
    linalg::pd_inverse(&linalg::sym(&info), "auxiliary information matrix")
}

/// Embedding `[I; C]` used by the observation LMIs.
fn stacked_embed(n: usize, c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = c.nrows();
    let mut f = DMatrix::zeros(n + p, n);
    f.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    f.view_mut((n, 0), (p, n)).copy_from(c);
    let mut e = DMatrix::zeros(n + p, n);
    e.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    (f, e)
}

/// Observation LMI `[M − P_next, M Cᵀ; C M, C M Cᵀ + V] ⪰ 0` where
/// `M = A P_prev Aᵀ + W` (or a constant `M` for the first step).
fn omega_expr(
    n: usize,
    c: &DMatrix<f64>,
    v: &DMatrix<f64>,
    source: OmegaSource,
    next_block: usize,
) -> MatrixExpr {
    let (f, e) = stacked_embed(n, c);
    let p = c.nrows();
    let mut expr = match source {
        OmegaSource::Constant(m) => MatrixExpr::new(linalg::sym(&(&f * m * f.transpose()))),
        OmegaSource::Predicted { prev_block, a, w } => {
            let constant = linalg::sym(&(&f * w * f.transpose()));
            MatrixExpr::new(constant).term(prev_block, 1.0, &f * a)
        }
    };
    if p > 0 {
        let block = expr.constant.view((n, n), (p, p)) + v;
        expr.constant.view_mut((n, n), (p, p)).copy_from(&block);
    }
    expr.term(next_block, -1.0, e)
}

enum OmegaSource<'a> {
    Constant(&'a DMatrix<f64>),
    Predicted {
        prev_block: usize,
        a: &'a DMatrix<f64>,
        w: &'a DMatrix<f64>,
    },
}

/// Schur LMI `[P − Π, P Aᵀ; A P, A P Aᵀ + W] ⪰ 0`.
fn schur_expr(
    n: usize,
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    p_block: usize,
    pi_block: usize,
) -> MatrixExpr {
    let mut constant = DMatrix::zeros(2 * n, 2 * n);
    constant.view_mut((n, n), (n, n)).copy_from(w);
    let mut g = DMatrix::zeros(2 * n, n);
    g.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    g.view_mut((n, 0), (n, n)).copy_from(a);
    let mut e = DMatrix::zeros(2 * n, n);
    e.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    MatrixExpr::new(constant)
        .term(p_block, 1.0, g)
        .term(pi_block, -1.0, e)
}

/// Objective term `−½ log det(I + S^{1/2}(A P Aᵀ + W)S^{1/2})` with
/// `S = snr^Y` (Sylvester-symmetrized). `None` when `S = 0`.
fn info_gain_expr(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    snr_y: &DMatrix<f64>,
    p_block: usize,
) -> Option<(f64, MatrixExpr)> {
    if snr_y.amax() == 0.0 {
        return None;
    }
    let n = a.nrows();
    let s_half = linalg::psd_sqrt(snr_y);
    let constant = DMatrix::identity(n, n) + &s_half * w * &s_half;
    Some((
        0.5,
        MatrixExpr::new(linalg::sym(&constant)).term(p_block, 1.0, &s_half * a),
    ))
}

/// Finite-horizon rate program (Theorem-2 form): `2T−1` decision blocks.
pub fn build_finite(
    model: &SystemModel,
    cost: &CostModel,
    gains: &GainSchedule,
) -> Result<MaxDetProblem> {
    let steps = match model.horizon() {
        Horizon::Finite(t) => t,
        Horizon::Infinite => {
            return Err(Error::Unsupported(
                "build_finite requires a finite-horizon model".into(),
            ))
        }
    };
    if gains.s.len() != steps {
        return Err(Error::Validation(format!(
            "gain schedule length {} does not match horizon {steps}",
            gains.s.len()
        )));
    }
    require_pd_w(model, steps)?;
    if !linalg::is_pd(model.p_init(), 1e-12) {
        return Err(Error::Validation(
            "finite-horizon program requires P_init ≻ 0".into(),
        ));
    }
    let n = model.n();
    // blocks: P_{t|t} at 0..T-1; Π_t at T..2T-2 for t < T; Π_T aliased.
    let mut blocks: Vec<(BlockLabel, usize)> =
        (0..steps).map(|t| (BlockLabel::Post(t), n)).collect();
    blocks.extend((0..steps.saturating_sub(1)).map(|t| (BlockLabel::Aux(t), n)));
    let p_idx = |t0: usize| t0;
    let pi_idx = |t0: usize| if t0 + 1 == steps { t0 } else { steps + t0 };

    // Λ = −½ log det(P_{1|0}⁻¹ + snr^Y_1) + ½ Σ_{t<T} log det W_t
    let info0 = linalg::pd_inverse(model.p_init(), "P_init")? + model.snr_y(0)?;
    let mut obj_constant = -0.5 * linalg::ln_det_floored(&linalg::sym(&info0));
    for t in 0..steps.saturating_sub(1) {
        obj_constant += 0.5 * linalg::ln_det_floored(model.w(t));
    }

    let mut obj_terms = Vec::new();
    for t in 0..steps.saturating_sub(1) {
        // measurement y_{t+2} (1-based t+1 term): snr index follows the
        // covariance it meets, A_t/W_t carry the time-varying dynamics.
        if let Some(term) = info_gain_expr(model.a(t), model.w(t), &model.snr_y(t + 1)?, p_idx(t)) {
            obj_terms.push(term);
        }
    }
    for t in 0..steps {
        obj_terms.push((
            0.5,
            MatrixExpr::new(DMatrix::zeros(n, n)).term(pi_idx(t), 1.0, DMatrix::identity(n, n)),
        ));
    }

    let mut lmis = Vec::new();
    for t in 0..steps.saturating_sub(1) {
        lmis.push(schur_expr(n, model.a(t), model.w(t), p_idx(t), pi_idx(t)));
    }
    lmis.push(omega_expr(
        n,
        model.c(0),
        model.v(0),
        OmegaSource::Constant(model.p_init()),
        p_idx(0),
    ));
    for t in 1..steps {
        lmis.push(omega_expr(
            n,
            model.c(t),
            model.v(t),
            OmegaSource::Predicted {
                prev_block: p_idx(t - 1),
                a: model.a(t - 1),
                w: model.w(t - 1),
            },
            p_idx(t),
        ));
    }

    let mut budget_constant = (gains.phi1.transpose() * model.p_init()).trace();
    for t in 0..steps {
        budget_constant += (gains.s[t].transpose() * model.w(t)).trace();
    }
    let budget = BudgetConstraint {
        coeffs: (0..steps).map(|t| (p_idx(t), gains.theta[t].clone())).collect(),
        constant: budget_constant,
        gamma: cost.gamma,
    };

    Ok(MaxDetProblem {
        blocks,
        obj_constant,
        obj_terms,
        lmis,
        budget,
        model: model.clone(),
    })
}

/// Infinite-horizon rate program (two blocks); optimum is nats per step.
pub fn build_infinite(
    model: &SystemModel,
    cost: &CostModel,
    gains: &StationaryGains,
) -> Result<MaxDetProblem> {
    if model.horizon().is_finite() {
        return Err(Error::Unsupported(
            "build_infinite requires a time-invariant model".into(),
        ));
    }
    require_pd_w(model, 1)?;
    let n = model.n();
    let (a, w) = (model.a(0), model.w(0));
    let snr_y = model.snr_y(0)?;
    let blocks = vec![(BlockLabel::Post(0), n), (BlockLabel::Aux(0), n)];

    let obj_constant = 0.5 * linalg::ln_det_floored(w);
    let mut obj_terms = Vec::new();
    if let Some(term) = info_gain_expr(a, w, &snr_y, 0) {
        obj_terms.push(term);
    }
    obj_terms.push((
        0.5,
        MatrixExpr::new(DMatrix::zeros(n, n)).term(1, 1.0, DMatrix::identity(n, n)),
    ));

    let lmis = vec![
        schur_expr(n, a, w, 0, 1),
        omega_expr(
            n,
            model.c(0),
            model.v(0),
            OmegaSource::Predicted {
                prev_block: 0,
                a,
                w,
            },
            0,
        ),
    ];

    let budget = BudgetConstraint {
        coeffs: vec![(0, gains.thetabar.clone())],
        constant: (gains.sbar.transpose() * w).trace(),
        gamma: cost.gamma,
    };

    Ok(MaxDetProblem {
        blocks,
        obj_constant,
        obj_terms,
        lmis,
        budget,
        model: model.clone(),
    })
}

impl MaxDetProblem {
    fn steps(&self) -> Option<usize> {
        match self.model.horizon() {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }
    }

    /// Objective value at given block values.
    pub fn objective_at(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.obj_constant
            + self
                .obj_terms
                .iter()
                .map(|(w, e)| -w * linalg::ln_det_floored(&e.eval(blocks)))
                .sum::<f64>()
    }

    /// Posterior schedule of the no-communication filter, as block values
    /// (with auxiliaries at their optimal values). `None` when the y-only
    /// recursion diverges or does not settle.
    fn nocomm_blocks(&self) -> Result<Option<Vec<DMatrix<f64>>>> {
        match self.steps() {
            Some(steps) => {
                let n = self.model.n();
                let sched =
                    kalman::forward_schedule(&self.model, steps, |_| DMatrix::zeros(n, n))?;
                Ok(Some(self.blocks_from_schedule(&sched.post)?))
            }
            None => {
                let snr_y = self.model.snr_y(0)?;
                let zero = DMatrix::zeros(self.model.n(), self.model.n());
                match kalman::stationary_posterior(
                    self.model.a(0),
                    self.model.w(0),
                    &snr_y,
                    &zero,
                    100_000,
                )? {
                    Stationary::Converged(p) => {
                        let pi = aux_optimum(&p, self.model.a(0), self.model.w(0))?;
                        Ok(Some(vec![p, pi]))
                    }
                    _ => Ok(None),
                }
            }
        }
    }

    /// Assemble full block values from a posterior schedule, with auxiliary
    /// blocks at `(P⁻¹ + AᵀW⁻¹A)⁻¹`.
    fn blocks_from_schedule(&self, post: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let steps = post.len();
        let mut vals: Vec<DMatrix<f64>> = post.to_vec();
        for t in 0..steps.saturating_sub(1) {
            vals.push(aux_optimum(&post[t], self.model.a(t), self.model.w(t))?);
        }
        Ok(vals)
    }

    /// Posterior schedule under `snr^F = σI` per step.
    fn full_info_posts(&self, sigma: f64) -> Result<Vec<DMatrix<f64>>> {
        let n = self.model.n();
        let snr_f = DMatrix::identity(n, n) * sigma;
        match self.steps() {
            Some(steps) => Ok(kalman::forward_schedule(&self.model, steps, |_| snr_f.clone())?.post),
            None => {
                let snr_y = self.model.snr_y(0)?;
                match kalman::stationary_posterior(
                    self.model.a(0),
                    self.model.w(0),
                    &snr_y,
                    &snr_f,
                    100_000,
                )? {
                    Stationary::Converged(p) => Ok(vec![p]),
                    _ => Err(Error::Numerical(
                        "full-information stationary covariance did not converge".into(),
                    )),
                }
            }
        }
    }

    /// Spec'd strictly feasible start: blend the no-communication schedule
    /// toward a high-SNR schedule until the budget and observation LMIs have
    /// interior margin, then put auxiliaries just inside their LMIs.
    fn feasible_start(&self) -> Result<Vec<DMatrix<f64>>> {
        let nocomm_posts: Option<Vec<DMatrix<f64>>> = match self.steps() {
            Some(steps) => {
                let n = self.model.n();
                Some(
                    kalman::forward_schedule(&self.model, steps, |_| DMatrix::zeros(n, n))?.post,
                )
            }
            None => {
                let snr_y = self.model.snr_y(0)?;
                let zero = DMatrix::zeros(self.model.n(), self.model.n());
                match kalman::stationary_posterior(
                    self.model.a(0),
                    self.model.w(0),
                    &snr_y,
                    &zero,
                    100_000,
                )? {
                    Stationary::Converged(p) => Some(vec![p]),
                    _ => None,
                }
            }
        };
        let mut snr_norm: f64 = 0.0;
        let probe_steps = self.steps().unwrap_or(1);
        for t in 0..probe_steps {
            snr_norm = snr_norm.max(self.model.snr_y(t)?.amax());
        }
        let mut sigma = 1e3 * snr_norm + 1.0;
        for _ in 0..14 {
            let full = self.full_info_posts(sigma)?;
            let mut alpha = if nocomm_posts.is_some() { 0.5 } else { 1.0 };
            for _ in 0..64 {
                let posts: Vec<DMatrix<f64>> = match &nocomm_posts {
                    Some(nc) => nc
                        .iter()
                        .zip(&full)
                        .map(|(a, b)| a * (1.0 - alpha) + b * alpha)
                        .collect(),
                    None => full.clone(),
                };
                if let Some(vals) = self.try_start(&posts)? {
                    return Ok(vals);
                }
                if nocomm_posts.is_none() {
                    break;
                }
                alpha = 0.5 * (1.0 + alpha);
                if alpha > 1.0 - 1e-12 {
                    break;
                }
            }
            sigma *= 10.0;
        }
        Err(Error::Numerical(format!(
            "no strictly feasible start found (gamma = {}, minimal cost = {})",
            self.budget.gamma, self.budget.constant
        )))
    }

    /// Check interior margins at a candidate posterior schedule and return
    /// full block values if acceptable.
    fn try_start(&self, posts: &[DMatrix<f64>]) -> Result<Option<Vec<DMatrix<f64>>>> {
        let mut vals = match self.steps() {
            Some(_) => self.blocks_from_schedule(posts)?,
            None => vec![
                posts[0].clone(),
                aux_optimum(&posts[0], self.model.a(0), self.model.w(0))?,
            ],
        };
        // margin on the budget and every LMI
        if self.budget.gamma - self.budget.eval(&vals) <= 1e-8 {
            return Ok(None);
        }
        // auxiliaries sit at 0.999 of their boundary value
        for (label, val) in self.blocks.iter().zip(vals.iter_mut()) {
            if matches!(label.0, BlockLabel::Aux(_)) {
                *val *= 0.999;
            }
        }
        for lmi in &self.lmis {
            if linalg::min_eig_sym(&lmi.eval(&vals)) <= 1e-8 {
                return Ok(None);
            }
        }
        for (w, e) in &self.obj_terms {
            let _ = w;
            if linalg::min_eig_sym(&e.eval(&vals)) <= 0.0 {
                return Ok(None);
            }
        }
        Ok(Some(vals))
    }
}

/// Solve a rate program.
///
/// Order of decisions: budget below the perfect-information cost ⇒
/// `InfeasibleBudget`; the no-communication schedule already meets the budget
/// ⇒ `ZeroRate` (rate exactly 0); otherwise the barrier method runs from the
/// spec'd strictly feasible start. Deterministic: identical inputs produce
/// bit-identical outputs.
pub fn solve(problem: &MaxDetProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let gamma = problem.budget.gamma;
    let gamma_min = problem.budget.constant;
    if gamma < gamma_min - opts.feas_tol * (1.0 + gamma_min.abs()) {
        return Ok(SdpSolution {
            status: SolveStatus::InfeasibleBudget,
            blocks: Vec::new(),
            objective_nats: f64::INFINITY,
            kkt: KktReport {
                budget_slack: gamma - gamma_min,
                ..Default::default()
            },
            newton_iters: 0,
        });
    }
    if let Some(nocomm) = problem.nocomm_blocks()? {
        if problem.budget.eval(&nocomm) <= gamma {
            let kkt = KktReport {
                lmi_min_eigs: problem
                    .lmis
                    .iter()
                    .map(|l| linalg::min_eig_sym(&l.eval(&nocomm)))
                    .collect(),
                budget_slack: gamma - problem.budget.eval(&nocomm),
                newton_decrement: 0.0,
                barrier_parameter: 0.0,
            };
            return Ok(SdpSolution {
                status: SolveStatus::ZeroRate,
                blocks: nocomm,
                objective_nats: 0.0,
                kkt,
                newton_iters: 0,
            });
        }
    }
    let start = problem.feasible_start()?;
    barrier::minimize(problem, start, opts)
}

/// Optimal covariances from an `Optimal` or `ZeroRate` solution.
pub fn extract_policy_covariances(
    solution: &SdpSolution,
    problem: &MaxDetProblem,
) -> Result<OptimalCovariances> {
    match solution.status {
        SolveStatus::Optimal | SolveStatus::ZeroRate => {}
        s => {
            return Err(Error::Unsupported(format!(
                "no covariances to extract from status {s:?}"
            )))
        }
    }
    let model = &problem.model;
    match problem.steps() {
        Some(steps) => {
            let mut pred = Vec::with_capacity(steps);
            let mut plus = Vec::with_capacity(steps);
            let mut post = Vec::with_capacity(steps);
            let mut p_pred = model.p_init().clone();
            for t in 0..steps {
                let p_post = linalg::psd_project(&solution.blocks[t]);
                plus.push(kalman::incorporate(&p_pred, &model.snr_y(t)?)?);
                pred.push(p_pred.clone());
                p_pred = kalman::predict(&p_post, model.a(t), model.w(t));
                post.push(p_post);
            }
            Ok(OptimalCovariances::Finite(CovarianceSchedule {
                pred,
                plus,
                post,
            }))
        }
        None => {
            let post = linalg::psd_project(&solution.blocks[0]);
            let pred = kalman::predict(&post, model.a(0), model.w(0));
            let plus = kalman::incorporate(&pred, &model.snr_y(0)?)?;
            Ok(OptimalCovariances::Stationary { post, plus, pred })
        }
    }
}

/// Cost bounds of an instance: perfect-information floor and y-only ceiling.
pub fn cost_bounds(model: &SystemModel, cost: &CostModel) -> Result<CostBounds> {
    match model.horizon() {
        Horizon::Finite(steps) => {
            let gains = crate::lqr::backward_riccati(model, cost, steps)?;
            let mut gamma_min = (gains.phi1.transpose() * model.p_init()).trace();
            for t in 0..steps {
                gamma_min += (gains.s[t].transpose() * model.w(t)).trace();
            }
            let n = model.n();
            let sched = kalman::forward_schedule(model, steps, |_| DMatrix::zeros(n, n))?;
            let mut gamma_nocomm = gamma_min;
            for t in 0..steps {
                gamma_nocomm += (gains.theta[t].transpose() * &sched.post[t]).trace();
            }
            Ok(CostBounds {
                gamma_min,
                gamma_nocomm,
            })
        }
        Horizon::Infinite => {
            let gains = crate::lqr::solve_dare(model, cost)?;
            let gamma_min = (gains.sbar.transpose() * model.w(0)).trace();
            let snr_y = model.snr_y(0)?;
            let zero = DMatrix::zeros(model.n(), model.n());
            let gamma_nocomm = match kalman::stationary_posterior(
                model.a(0),
                model.w(0),
                &snr_y,
                &zero,
                100_000,
            )? {
                Stationary::Converged(p) => {
                    gamma_min + (gains.thetabar.transpose() * &p).trace()
                }
                _ => f64::INFINITY,
            };
            Ok(CostBounds {
                gamma_min,
                gamma_nocomm,
            })
        }
    }
}
