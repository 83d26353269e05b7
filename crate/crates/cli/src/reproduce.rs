//! Benchmark system and curve definitions behind `reproduce-paper`.
//!
//! The 4×4 plant below is the standard benchmark for this problem family;
//! `Q = R = I`. Figure `fig2` varies the side-information SNR
//! (`C = I`, `V = I/ρ` for ρ ∈ {0, 0.1, 1, 10}; ρ = 0 means no observation)
//! over budgets Γ ∈ [30, 90] in steps of 5. Figure `fig3` fixes `V = I` and
//! varies observability: `C(r) = [0_{r×(4−r)}, I_r]` for r = 0..4 plus a
//! matrix orthogonal to the plant's dominant unstable eigenvector.

use nalgebra::{dmatrix, DMatrix};
use ratelqg::model::{CostModel, SystemModel};
use ratelqg::sdp::SolverOptions;
use ratelqg::Result;

use crate::pipeline::{tradeoff, TradeoffPoint};

pub fn benchmark_a() -> DMatrix<f64> {
    dmatrix![
        0.12, 0.63, -0.52, 0.33;
        0.26, -1.28, 1.57, 1.13;
        -1.77, -0.30, 0.77, 0.25;
        -0.16, 0.20, -0.58, 0.56
    ]
}

pub fn benchmark_b() -> DMatrix<f64> {
    dmatrix![
        0.66, -0.58, 0.03, -0.20;
        2.61, -0.91, 0.87, -0.07;
        -0.64, -1.12, -0.19, 0.61;
        0.93, 0.58, -1.18, -1.21
    ]
}

pub fn benchmark_w() -> DMatrix<f64> {
    dmatrix![
        4.94, -0.10, 1.29, 0.35;
        -0.10, 5.55, 2.07, 0.31;
        1.29, 2.07, 2.02, 1.43;
        0.35, 0.31, 1.43, 3.10
    ]
}

/// Observation matrix orthogonal to the unstable eigenvector at λ₁ ≈ −1.712.
pub fn c_blind_to_unstable() -> DMatrix<f64> {
    dmatrix![
        1.0, 1.0, 1.0, 3.75;
        2.11, 1.0, 1.0, 1.0;
        1.0, 1.0, 0.0, 4.56
    ]
}

/// Partial observability `C(r) = [0_{r×(4−r)}, I_r]` (r = 0 → no rows).
pub fn c_selector(r: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(r, 4);
    for i in 0..r {
        c[(i, 4 - r + i)] = 1.0;
    }
    c
}

/// Time-invariant benchmark instance with the given observation pair.
pub fn benchmark_model(c: DMatrix<f64>, v: DMatrix<f64>) -> Result<SystemModel> {
    SystemModel::time_invariant(
        benchmark_a(),
        benchmark_b(),
        c,
        benchmark_w(),
        v,
        benchmark_w(),
    )
}

/// `C = I`, `V = I/ρ`; ρ = 0 degenerates to no observation.
pub fn benchmark_model_snr(rho: f64) -> Result<SystemModel> {
    if rho == 0.0 {
        benchmark_model(DMatrix::zeros(0, 4), DMatrix::zeros(0, 0))
    } else {
        benchmark_model(DMatrix::identity(4, 4), DMatrix::identity(4, 4) / rho)
    }
}

/// Budgets Γ = 30, 35, …, 90.
pub fn gamma_grid() -> Vec<f64> {
    (0..=12).map(|i| 30.0 + 5.0 * i as f64).collect()
}

/// One named curve of a figure.
pub struct Curve {
    /// File-name stem, e.g. `fig2_rho0p1`.
    pub name: String,
    pub rows: Vec<TradeoffPoint>,
}

fn rho_tag(rho: f64) -> String {
    if rho == 0.0 {
        "rho0".into()
    } else if rho < 1.0 {
        format!("rho0p{}", (rho * 10.0).round() as u64)
    } else {
        format!("rho{}", rho.round() as u64)
    }
}

/// All curves of `fig2` (ρ sweep) or `fig3` (observability sweep).
pub fn figure_curves(figure: &str, opts: &SolverOptions, jobs: usize) -> Result<Vec<Curve>> {
    let gammas = gamma_grid();
    let cost = CostModel::identity(4, 4, gammas[0]);
    match figure {
        "fig2" => [0.0, 0.1, 1.0, 10.0]
            .iter()
            .map(|&rho| {
                let model = benchmark_model_snr(rho)?;
                Ok(Curve {
                    name: format!("fig2_{}", rho_tag(rho)),
                    rows: tradeoff(&model, &cost, &gammas, opts, jobs),
                })
            })
            .collect(),
        "fig3" => {
            let mut curves = Vec::new();
            for r in 0..=4usize {
                let model = benchmark_model(c_selector(r), DMatrix::identity(r, r))?;
                curves.push(Curve {
                    name: format!("fig3_r{r}"),
                    rows: tradeoff(&model, &cost, &gammas, opts, jobs),
                });
            }
            let model = benchmark_model(c_blind_to_unstable(), DMatrix::identity(3, 3))?;
            curves.push(Curve {
                name: "fig3_cprime".into(),
                rows: tradeoff(&model, &cost, &gammas, opts, jobs),
            });
            Ok(curves)
        }
        other => Err(ratelqg::Error::Validation(format!(
            "unknown figure {other:?} (expected fig2 or fig3)"
        ))),
    }
}
