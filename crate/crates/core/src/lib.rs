//! Rate-constrained LQG control with side information.
//!
//! An LQG plant is observed through a free noisy measurement `y_t = C x_t + v_t`.
//! When that measurement alone cannot reach a quadratic-cost budget, a
//! communication link from a full observer (encoder) to the controller closes
//! the gap. This crate computes the minimal link rate (conditional directed
//! information, in nats) needed to meet a cost budget, and synthesizes the
//! linear Gaussian encoder / certainty-equivalence controller that achieves it.
//!
//! Pipeline:
//!
//! 1. [`model`] — problem instances (system, noise, cost, budget) and spectral
//!    diagnostics.
//! 2. [`lqr`] — controller gains from the backward Riccati recursion or the
//!    stabilizing DARE solution.
//! 3. [`sdp`] — the rate-minimization problems as determinant-maximization
//!    programs, solved with a self-contained barrier interior-point method.
//! 4. [`synthesis`] — optimal covariances turned into an executable policy
//!    (encoder matrices, Kalman gains, stability certificate).
//! 5. [`sim`] — seeded Monte Carlo validation of cost, covariance and rate.
//!
//! [`kalman`] holds the two-measurement covariance algebra the other modules
//! share, and [`scalar`] the closed-form scalar solution used as an oracle.

use thiserror::Error;

pub mod kalman;
pub mod linalg;
pub mod lqr;
pub mod model;
pub mod scalar;
pub mod sdp;
pub mod sim;
pub mod synthesis;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimension mismatch, indefinite matrix, bad field.
    #[error("validation: {0}")]
    Validation(String),

    /// Operation not defined for this horizon or configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A structural hypothesis failed (stabilizability / observability rank test).
    #[error("infeasible structure: {0}")]
    InfeasibleStructure(String),

    /// An iterative method did not converge or a factorization broke down.
    #[error("numerical: {0}")]
    Numerical(String),

    /// Inputs are mutually inconsistent (e.g. a solver output violates feasibility).
    #[error("inconsistent: {0}")]
    Inconsistent(String),

    /// The cost budget is below the attainable minimum.
    #[error("infeasible budget: {0}")]
    Infeasible(String),

    /// A matrix required to be (positive definite and) invertible was singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
