//! Problem instances: system dynamics, noise statistics, cost, budget.
//!
//! A [`SystemModel`] is either finite-horizon (length-`T` matrix sequences,
//! possibly time-varying) or infinite-horizon (single time-invariant
//! matrices). `p = 0` encodes "no plant observation": `C` has zero rows and
//! the observation SNR matrix is zero, which recovers the setting where all
//! controller knowledge arrives over the communication link.

use nalgebra::{Complex, DMatrix};
use serde::Deserialize;

use crate::linalg;
use crate::{Error, Result};

/// Optimization horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// `T ≥ 1` steps; matrix sequences have length `T` (or 1 when constant).
    Finite(usize),
    /// Time-invariant matrices, long-run average cost and rate.
    Infinite,
}

impl Horizon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite(_))
    }
}

fn seq_get(seq: &[DMatrix<f64>], t: usize) -> &DMatrix<f64> {
    if seq.len() == 1 {
        &seq[0]
    } else {
        &seq[t]
    }
}

/// Linear dynamics `x_{t+1} = A_t x_t + B_t u_t + w_t`, observation
/// `y_t = C_t x_t + v_t`, initial covariance `P_{1|0}`.
#[derive(Debug, Clone)]
pub struct SystemModel {
    n: usize,
    m: usize,
    p: usize,
    horizon: Horizon,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    w: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    p_init: DMatrix<f64>,
}

/// Quadratic cost weights `x_{t+1}ᵀ Q_t x_{t+1} + u_tᵀ R_t u_t` and budget Γ.
#[derive(Debug, Clone)]
pub struct CostModel {
    q: Vec<DMatrix<f64>>,
    r: Vec<DMatrix<f64>>,
    pub gamma: f64,
}

const SYM_TOL: f64 = 1e-9;

fn check_symmetrize(seq: &mut [DMatrix<f64>], name: &str) -> Result<()> {
    for (t, x) in seq.iter_mut().enumerate() {
        if linalg::rel_asymmetry(x) > SYM_TOL {
            return Err(Error::Validation(format!(
                "{name}[{t}] is asymmetric beyond {SYM_TOL:e} relative"
            )));
        }
        *x = linalg::sym(x);
    }
    Ok(())
}

fn check_seq_dims(
    seq: &[DMatrix<f64>],
    rows: usize,
    cols: usize,
    horizon: Horizon,
    name: &str,
) -> Result<()> {
    let want = match horizon {
        Horizon::Finite(t) => {
            if seq.len() != 1 && seq.len() != t {
                return Err(Error::Validation(format!(
                    "{name}: sequence length {} (want 1 or T = {t})",
                    seq.len()
                )));
            }
            (rows, cols)
        }
        Horizon::Infinite => {
            if seq.len() != 1 {
                return Err(Error::Validation(format!(
                    "{name}: infinite horizon takes a single matrix, got {}",
                    seq.len()
                )));
            }
            (rows, cols)
        }
    };
    for (t, x) in seq.iter().enumerate() {
        if x.nrows() != want.0 || x.ncols() != want.1 {
            return Err(Error::Validation(format!(
                "{name}[{t}]: shape {}x{} (want {}x{})",
                x.nrows(),
                x.ncols(),
                want.0,
                want.1
            )));
        }
    }
    Ok(())
}

impl SystemModel {
    /// Build a model from matrix sequences (each of length 1 or `T`).
    /// Symmetric inputs are checked (1e-9 relative) and then symmetrized.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: Horizon,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        mut c: Vec<DMatrix<f64>>,
        mut w: Vec<DMatrix<f64>>,
        mut v: Vec<DMatrix<f64>>,
        p_init: DMatrix<f64>,
    ) -> Result<Self> {
        if let Horizon::Finite(t) = horizon {
            if t == 0 {
                return Err(Error::Validation("horizon T must be >= 1".into()));
            }
        }
        let first = a
            .first()
            .ok_or_else(|| Error::Validation("A: empty sequence".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::Validation("state dimension n must be >= 1".into()));
        }
        let m = b
            .first()
            .ok_or_else(|| Error::Validation("B: empty sequence".into()))?
            .ncols();
        let p = c
            .first()
            .map(|c0| c0.nrows())
            .unwrap_or(0);
        if c.is_empty() {
            c = vec![DMatrix::zeros(0, n)];
        }
        if v.is_empty() {
            v = vec![DMatrix::zeros(0, 0)];
        }
        check_seq_dims(&a, n, n, horizon, "A")?;
        check_seq_dims(&b, n, m, horizon, "B")?;
        check_seq_dims(&c, p, n, horizon, "C")?;
        check_seq_dims(&w, n, n, horizon, "W")?;
        check_seq_dims(&v, p, p, horizon, "V")?;
        if p_init.nrows() != n || p_init.ncols() != n {
            return Err(Error::Validation(format!(
                "P_init: shape {}x{} (want {n}x{n})",
                p_init.nrows(),
                p_init.ncols()
            )));
        }
        check_symmetrize(&mut w, "W")?;
        check_symmetrize(&mut v, "V")?;
        let mut pi = vec![p_init];
        check_symmetrize(&mut pi, "P_init")?;
        let p_init = pi.pop().unwrap();
        Ok(Self {
            n,
            m,
            p,
            horizon,
            a,
            b,
            c,
            w,
            v,
            p_init,
        })
    }

    /// Time-invariant (infinite-horizon) model.
    pub fn time_invariant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        w: DMatrix<f64>,
        v: DMatrix<f64>,
        p_init: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(
            Horizon::Infinite,
            vec![a],
            vec![b],
            vec![c],
            vec![w],
            vec![v],
            p_init,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// `A_t`, 0-based step index (ignored for constant / time-invariant models).
    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.a, t)
    }
    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.b, t)
    }
    pub fn c(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.c, t)
    }
    pub fn w(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.w, t)
    }
    pub fn v(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.v, t)
    }
    pub fn p_init(&self) -> &DMatrix<f64> {
        &self.p_init
    }

    /// Observation SNR matrix `C_tᵀ V_t⁻¹ C_t` at step `t`.
    pub fn snr_y(&self, t: usize) -> Result<DMatrix<f64>> {
        crate::kalman::snr_matrix(self.c(t), self.v(t))
    }
}

impl CostModel {
    pub fn new(q: Vec<DMatrix<f64>>, r: Vec<DMatrix<f64>>, gamma: f64) -> Result<Self> {
        if q.is_empty() || r.is_empty() {
            return Err(Error::Validation("Q/R: empty sequence".into()));
        }
        let mut q = q;
        let mut r = r;
        check_symmetrize(&mut q, "Q")?;
        check_symmetrize(&mut r, "R")?;
        Ok(Self { q, r, gamma })
    }

    /// Identity `Q`, `R` with the given dimensions.
    pub fn identity(n: usize, m: usize, gamma: f64) -> Self {
        Self {
            q: vec![DMatrix::identity(n, n)],
            r: vec![DMatrix::identity(m, m)],
            gamma,
        }
    }

    pub fn q(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.q, t)
    }
    pub fn r(&self, t: usize) -> &DMatrix<f64> {
        seq_get(&self.r, t)
    }

    /// Same weights, different budget.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            q: self.q.clone(),
            r: self.r.clone(),
            gamma,
        }
    }
}

/// Outcome of [`validate`]: empty `violations` means the instance is usable.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Turn the report into an error if any violation was recorded.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations.join("; ")))
        }
    }
}

/// Check definiteness and dimension invariants. Pure; never fails itself —
/// problems are reported in the returned [`ValidationReport`].
pub fn validate(model: &SystemModel, cost: &CostModel) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let steps = match model.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => 1,
    };
    for t in 0..steps {
        if !linalg::is_psd(model.w(t), SYM_TOL) {
            rep.violations.push(format!("W[{t}] not PSD"));
        }
        if model.p > 0 && !linalg::is_pd(model.v(t), 1e-12) {
            rep.violations.push(format!("V[{t}] not PD"));
        }
        if !linalg::is_psd(cost.q(t), SYM_TOL) {
            rep.violations.push(format!("Q[{t}] not PSD"));
        }
        if !linalg::is_pd(cost.r(t), 1e-12) {
            rep.violations.push(format!("R[{t}] not PD"));
        }
        if cost.q(t).nrows() != model.n {
            rep.violations.push(format!(
                "Q[{t}]: shape {}x{} (want {0}x{0})",
                cost.q(t).nrows(),
                cost.q(t).ncols()
            ));
        }
        if cost.r(t).nrows() != model.m {
            rep.violations.push(format!(
                "R[{t}]: shape {}x{} (want {0}x{0})",
                cost.r(t).nrows(),
                cost.r(t).ncols()
            ));
        }
    }
    if let Horizon::Finite(t) = model.horizon {
        for (seq, name) in [(&cost.q, "Q"), (&cost.r, "R")] {
            if seq.len() != 1 && seq.len() != t {
                rep.violations.push(format!(
                    "{name}: sequence length {} (want 1 or T = {t})",
                    seq.len()
                ));
            }
        }
    }
    if !linalg::is_psd(model.p_init(), SYM_TOL) {
        rep.violations.push("P_init not PSD".into());
    }
    if !(cost.gamma > 0.0) {
        rep.violations.push("gamma must be > 0".into());
    }
    rep
}

/// Spectral diagnostics of a time-invariant system.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Eigenvalues of `A`, sorted by modulus descending.
    pub eigenvalues: Vec<Complex<f64>>,
    /// `Σᵢ log₂ max(1, |λᵢ(A)|)`: the rate floor for stabilizing `A` when the
    /// unstable modes are unobserved.
    pub stabilization_rate_bits: f64,
    /// PBH stabilizability of `(A, B)`.
    pub stabilizable: bool,
    /// PBH detectability of `(A, C)`.
    pub detectable_y: bool,
    /// PBH observability of `(A, Q^{1/2})` on the unit circle.
    pub observable_q: bool,
}

/// Eigen-structure and rank tests of a time-invariant model.
///
/// Errors with [`Error::Unsupported`] on a finite (time-varying) horizon.
pub fn spectral_report(model: &SystemModel, cost: &CostModel) -> Result<SpectralReport> {
    if model.horizon.is_finite() {
        return Err(Error::Unsupported(
            "spectral_report requires an infinite-horizon (time-invariant) model".into(),
        ));
    }
    let a = model.a(0);
    let eigenvalues = linalg::eigenvalues(a);
    let stabilization_rate_bits = eigenvalues
        .iter()
        .map(|l| l.norm().max(1.0).log2())
        .sum();
    let unstable = |l: &Complex<f64>| l.norm() >= 1.0 - 1e-9;
    let on_circle = |l: &Complex<f64>| (l.norm() - 1.0).abs() <= 1e-8;
    let stabilizable = linalg::pbh_controllable_at(a, model.b(0), unstable).is_none();
    let detectable_y = linalg::pbh_observable_at(a, model.c(0), unstable).is_none();
    let q_sqrt = linalg::psd_sqrt(cost.q(0));
    let observable_q = linalg::pbh_observable_at(a, &q_sqrt, on_circle).is_none();
    Ok(SpectralReport {
        eigenvalues,
        stabilization_rate_bits,
        stabilizable,
        detectable_y,
        observable_q,
    })
}

// ---------------------------------------------------------------------------
// JSON problem configs
// ---------------------------------------------------------------------------

/// A matrix field: one matrix (constant over time) or a length-`T` sequence.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatField {
    One(Vec<Vec<f64>>),
    Seq(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum HorizonField {
    Steps(usize),
    Tag(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    m: usize,
    p: usize,
    horizon: HorizonField,
    #[serde(rename = "A")]
    a: MatField,
    #[serde(rename = "B")]
    b: MatField,
    #[serde(rename = "C")]
    c: Option<MatField>,
    #[serde(rename = "V")]
    v: Option<MatField>,
    #[serde(rename = "W")]
    w: MatField,
    #[serde(rename = "Q")]
    q: MatField,
    #[serde(rename = "R")]
    r: MatField,
    #[serde(rename = "P_init")]
    p_init: Option<MatField>,
    gamma: f64,
    gamma_sweep: Option<Vec<f64>>,
    seed: Option<u64>,
}

fn to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!(
            "{name}: expected {nrows}x{ncols} row-major nested arrays"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn to_seq(field: &MatField, nrows: usize, ncols: usize, name: &str) -> Result<Vec<DMatrix<f64>>> {
    match field {
        MatField::One(rows) => Ok(vec![to_matrix(rows, nrows, ncols, name)?]),
        MatField::Seq(seq) => seq
            .iter()
            .enumerate()
            .map(|(t, rows)| to_matrix(rows, nrows, ncols, &format!("{name}[{t}]")))
            .collect(),
    }
}

/// A fully parsed problem instance plus sweep/seed metadata.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub model: SystemModel,
    pub cost: CostModel,
    pub gamma_sweep: Option<Vec<f64>>,
    pub seed: u64,
}

/// Parse a JSON config (see the README for the schema).
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let raw: RawConfig = serde_json::from_str(text)?;
    let horizon = match &raw.horizon {
        HorizonField::Steps(t) => Horizon::Finite(*t),
        HorizonField::Tag(s) if s == "infinite" => Horizon::Infinite,
        HorizonField::Tag(s) => {
            return Err(Error::Validation(format!(
                "horizon: expected \"infinite\" or an integer T, got {s:?}"
            )))
        }
    };
    let a = to_seq(&raw.a, raw.n, raw.n, "A")?;
    let b = to_seq(&raw.b, raw.n, raw.m, "B")?;
    let c = match (&raw.c, raw.p) {
        (_, 0) => vec![DMatrix::zeros(0, raw.n)],
        (Some(f), p) => to_seq(f, p, raw.n, "C")?,
        (None, _) => return Err(Error::Validation("C: required when p > 0".into())),
    };
    let v = match (&raw.v, raw.p) {
        (_, 0) => vec![DMatrix::zeros(0, 0)],
        (Some(f), p) => to_seq(f, p, raw.p, "V")?,
        (None, _) => return Err(Error::Validation("V: required when p > 0".into())),
    };
    let w = to_seq(&raw.w, raw.n, raw.n, "W")?;
    let q = to_seq(&raw.q, raw.n, raw.n, "Q")?;
    let r = to_seq(&raw.r, raw.m, raw.m, "R")?;
    // Infinite-horizon answers do not depend on P_init; default to W there.
    let p_init = match &raw.p_init {
        Some(f) => {
            let seq = to_seq(f, raw.n, raw.n, "P_init")?;
            if seq.len() != 1 {
                return Err(Error::Validation("P_init: a single matrix".into()));
            }
            seq.into_iter().next().unwrap()
        }
        None => {
            if horizon.is_finite() {
                return Err(Error::Validation(
                    "P_init: required for finite-horizon configs".into(),
                ));
            }
            w[0].clone()
        }
    };
    let model = SystemModel::new(horizon, a, b, c, w, v, p_init)?;
    let cost = CostModel::new(q, r, raw.gamma)?;
    validate(&model, &cost).into_result()?;
    Ok(ProblemConfig {
        model,
        cost,
        gamma_sweep: raw.gamma_sweep,
        seed: raw.seed.unwrap_or(0),
    })
}

/// Load and parse a config file.
pub fn load_config(path: &std::path::Path) -> Result<ProblemConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_model(a: f64) -> SystemModel {
        SystemModel::time_invariant(
            dmatrix![a],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
        )
        .unwrap()
    }

    #[test]
    fn validate_scalar_ok() {
        let model = scalar_model(2.0);
        let cost = CostModel::identity(1, 1, 10.0);
        assert!(validate(&model, &cost).is_ok());
    }

    #[test]
    fn validate_flags_singular_v() {
        let model = SystemModel::time_invariant(
            dmatrix![2.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
            dmatrix![1.0],
        )
        .unwrap();
        let rep = validate(&model, &CostModel::identity(1, 1, 10.0));
        assert!(rep.violations.iter().any(|v| v.contains("V[0] not PD")));
    }

    #[test]
    fn validate_flags_indefinite_q() {
        let model = scalar_model(2.0);
        let cost = CostModel::new(vec![dmatrix![-1e-3]], vec![dmatrix![1.0]], 10.0).unwrap();
        let rep = validate(&model, &cost);
        assert!(rep.violations.iter().any(|v| v.contains("Q[0] not PSD")));
    }

    #[test]
    fn validate_is_idempotent() {
        let model = scalar_model(2.0);
        let cost = CostModel::identity(1, 1, 10.0);
        let a = validate(&model, &cost);
        let b = validate(&model, &cost);
        assert_eq!(a.violations, b.violations);
    }

    #[test]
    fn asymmetric_w_rejected() {
        let w = dmatrix![1.0, 0.5; 0.0, 1.0];
        let r = SystemModel::time_invariant(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(0, 2),
            w,
            DMatrix::zeros(0, 0),
            DMatrix::identity(2, 2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn spectral_scalar_stable() {
        let model = scalar_model(0.5);
        let rep = spectral_report(&model, &CostModel::identity(1, 1, 1.0)).unwrap();
        assert_eq!(rep.stabilization_rate_bits, 0.0);
        assert!(rep.stabilizable && rep.detectable_y && rep.observable_q);
    }

    #[test]
    fn spectral_rejects_finite_horizon() {
        let model = SystemModel::new(
            Horizon::Finite(3),
            vec![dmatrix![2.0]],
            vec![dmatrix![1.0]],
            vec![dmatrix![1.0]],
            vec![dmatrix![1.0]],
            vec![dmatrix![1.0]],
            dmatrix![1.0],
        )
        .unwrap();
        assert!(matches!(
            spectral_report(&model, &CostModel::identity(1, 1, 1.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn stabilization_rate_similarity_invariant() {
        // rate(A) == rate(T A T^-1) for well-conditioned T.
        let a = dmatrix![1.3, 0.7, 0.0; 0.0, 0.4, 0.2; 0.5, 0.0, -1.1];
        let t = dmatrix![2.0, 0.3, 0.0; 0.1, 1.5, 0.0; 0.0, 0.2, 0.8];
        let ti = t.clone().try_inverse().unwrap();
        let sim = &t * &a * &ti;
        let rate = |mat: &DMatrix<f64>| -> f64 {
            linalg::eigenvalues(mat)
                .iter()
                .map(|l| l.norm().max(1.0).log2())
                .sum()
        };
        assert!((rate(&a) - rate(&sim)).abs() < 1e-9);
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "n": 1, "m": 1, "p": 1,
            "horizon": "infinite",
            "A": [[2.0]], "B": [[1.0]], "C": [[1.0]],
            "W": [[1.0]], "V": [[1.0]], "Q": [[1.0]], "R": [[1.0]],
            "gamma": 10.0,
            "gamma_sweep": [5.0, 10.0],
            "seed": 7
        }"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.n(), 1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.gamma_sweep.as_deref(), Some(&[5.0, 10.0][..]));
        // P_init defaults to W for infinite horizon
        assert_eq!(cfg.model.p_init()[(0, 0)], 1.0);
    }

    #[test]
    fn config_p_zero_omits_c_v() {
        let text = r#"{
            "n": 2, "m": 1, "p": 0,
            "horizon": "infinite",
            "A": [[0.5, 0.0], [0.0, 0.3]], "B": [[1.0], [1.0]],
            "W": [[1.0, 0.0], [0.0, 1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]],
            "gamma": 10.0
        }"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.p(), 0);
        assert_eq!(cfg.model.c(0).nrows(), 0);
        let snr = cfg.model.snr_y(0).unwrap();
        assert_eq!(snr, DMatrix::zeros(2, 2));
    }

    #[test]
    fn config_time_varying_finite() {
        let text = r#"{
            "n": 1, "m": 1, "p": 1,
            "horizon": 2,
            "A": [[[2.0]], [[1.5]]], "B": [[1.0]], "C": [[1.0]],
            "W": [[1.0]], "V": [[1.0]], "Q": [[1.0]], "R": [[1.0]],
            "P_init": [[1.0]],
            "gamma": 10.0
        }"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.a(0)[(0, 0)], 2.0);
        assert_eq!(cfg.model.a(1)[(0, 0)], 1.5);
    }

    #[test]
    fn config_unknown_field_rejected() {
        let text = r#"{"n": 1, "m": 1, "p": 1, "horizon": "infinite", "A": [[2.0]],
            "B": [[1.0]], "C": [[1.0]], "W": [[1.0]], "V": [[1.0]], "Q": [[1.0]],
            "R": [[1.0]], "gamma": 1.0, "bogus": 3}"#;
        assert!(parse_config(text).is_err());
    }
}
