//! Closed-form scalar solution (unit cost weights, `|A| > 1`).
//!
//! For scalar `A, B, W, C, V` with `Q = R = 1` the infinite-horizon rate has
//! an explicit form, which doubles as an exact oracle for the SDP solver:
//!
//! ```text
//! rate(Γ) = ½ log(A² + WΘ/(Γ−WS̄)) − ½ log(1 + snrY(W + A²(Γ−WS̄)/Θ))
//! ```
//!
//! on `WS̄ < Γ ≤ WS̄ + ΘP*`, and 0 beyond the threshold. `P*` is the
//! stationary covariance of the y-only filter; at `Γ = WS̄ + ΘP*` the two
//! logs cancel and the rate reaches 0 continuously.
//!
//! General scalar `Q, R` fall outside the closed form; use `lqr` + `sdp`.

use crate::{Error, Result};

/// Stationary value `S̄` for scalar `A, B` with `Q = R = 1`:
/// the positive root of the scalar DARE.
///
/// Requires `|A| > 1`; stable systems fall back to [`crate::lqr::solve_dare`].
pub fn sbar_scalar(a: f64, b: f64) -> Result<f64> {
    if a.abs() <= 1.0 {
        return Err(Error::Unsupported(format!(
            "closed form requires |A| > 1 (got A = {a}); use solve_dare"
        )));
    }
    if b == 0.0 {
        return Err(Error::InfeasibleStructure(
            "(A,B) not stabilizable: B = 0 with |A| > 1".into(),
        ));
    }
    let t = a * a + b * b - 1.0;
    Ok((t + (t * t + 4.0 * b * b).sqrt()) / (2.0 * b * b))
}

/// `Θ = (ABS̄)² / (1 + B²S̄)` for the same convention.
pub fn theta_scalar(a: f64, b: f64) -> Result<f64> {
    let sbar = sbar_scalar(a, b)?;
    Ok((a * b * sbar).powi(2) / (1.0 + b * b * sbar))
}

/// Stationary y-only error variance: the unique positive root of
/// `A²·snr·P² + (1 − A² + snr·W)·P − W = 0`.
///
/// `snr = 0` degenerates to the linear equation: `W/(1−A²)` for `|A| < 1`,
/// `+∞` otherwise (undetectable unstable mode).
pub fn pstar_scalar(a: f64, w: f64, snr_y: f64) -> f64 {
    let a2 = a * a;
    if snr_y == 0.0 || a == 0.0 {
        // (1 − A²)P = W
        return if a2 < 1.0 { w / (1.0 - a2) } else { f64::INFINITY };
    }
    let qa = a2 * snr_y;
    let qb = 1.0 - a2 + snr_y * w;
    let qc = -w;
    // stable quadratic: q = -(b + sign(b)·√disc)/2; roots q/a and c/q
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let q = -0.5 * (qb + qb.signum() * disc);
    let (r1, r2) = (q / qa, qc / q);
    if r1 > 0.0 {
        r1
    } else {
        r2
    }
}

/// The ratio `P/P⁺(P)` of a stationary schedule with posterior variance `P`:
/// the per-step rate is `−½ ln` of it. Strictly increasing in `P > 0` and
/// equal to 1 at `P = P*`.
pub fn stationary_info_ratio(p: f64, a: f64, w: f64, snr_y: f64) -> f64 {
    let m = a * a * p + w;
    p * (1.0 + snr_y * m) / m
}

/// Closed-form scalar solution pieces.
#[derive(Debug, Clone)]
pub struct ScalarSolution {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub snr_y: f64,
    pub sbar: f64,
    pub theta: f64,
    /// Stationary y-only variance (`+∞` when `snr_y = 0` and `|A| ≥ 1`).
    pub pstar: f64,
    /// `W·S̄ + Θ·P*`: budgets above it need no communication.
    pub gamma_threshold: f64,
}

impl ScalarSolution {
    /// Build the solution pieces for scalar `A,B,W,C,V` with `Q = R = 1`.
    pub fn new(a: f64, b: f64, w: f64, c: f64, v: f64) -> Result<Self> {
        let snr_y = if c == 0.0 {
            0.0
        } else {
            if v <= 0.0 {
                return Err(Error::Singular("V must be positive when C != 0".into()));
            }
            c * c / v
        };
        let sbar = sbar_scalar(a, b)?;
        let theta = theta_scalar(a, b)?;
        let pstar = pstar_scalar(a, w, snr_y);
        let gamma_threshold = if pstar.is_finite() {
            w * sbar + theta * pstar
        } else {
            f64::INFINITY
        };
        Ok(Self {
            a,
            b,
            w,
            snr_y,
            sbar,
            theta,
            pstar,
            gamma_threshold,
        })
    }

    /// Reparametrized budget `d = (Γ − WS̄)/Θ`: the posterior variance the
    /// budget affords.
    pub fn d_of_gamma(&self, gamma: f64) -> f64 {
        (gamma - self.w * self.sbar) / self.theta
    }

    /// Optimal stationary posterior variance at budget `gamma`.
    pub fn p_of_gamma(&self, gamma: f64) -> Result<f64> {
        self.check_feasible(gamma)?;
        Ok(self.d_of_gamma(gamma).min(self.pstar))
    }

    fn check_feasible(&self, gamma: f64) -> Result<()> {
        if gamma <= self.w * self.sbar {
            return Err(Error::Infeasible(format!(
                "gamma {} ≤ minimal cost W·S̄ = {}",
                gamma,
                self.w * self.sbar
            )));
        }
        Ok(())
    }

    /// Minimal rate in nats at budget `gamma`.
    pub fn rate_nats(&self, gamma: f64) -> Result<f64> {
        self.check_feasible(gamma)?;
        if gamma > self.gamma_threshold {
            return Ok(0.0);
        }
        let surplus = gamma - self.w * self.sbar;
        let a2 = self.a * self.a;
        let growth = 0.5 * (a2 + self.w * self.theta / surplus).ln();
        let gain = 0.5
            * (1.0 + self.snr_y * (self.w + a2 * surplus / self.theta)).ln();
        Ok(growth - gain)
    }

    /// Same value via the `d`-parametrization
    /// `−½ log[d(snrY + 1/(A²d + W))]`; agrees with [`Self::rate_nats`]
    /// to roundoff.
    pub fn rate_nats_reparam(&self, gamma: f64) -> Result<f64> {
        self.check_feasible(gamma)?;
        if gamma > self.gamma_threshold {
            return Ok(0.0);
        }
        let d = self.d_of_gamma(gamma);
        Ok(-0.5 * (d * (self.snr_y + 1.0 / (self.a * self.a * d + self.w))).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SBAR: f64 = 4.236_067_977_499_79; // 2 + sqrt(5)
    const THETA: f64 = 13.708_203_932_499_37; // 7 + 3·sqrt(5)
    const PSTAR: f64 = 0.809_016_994_374_947_4; // (1 + sqrt(5))/4
    const THRESHOLD: f64 = 15.326_237_921_249_264;
    const RATE_AT_10: f64 = 0.274_735_215_962_020_4;
    const RATE_NO_Y_AT_10: f64 = 0.926_448_685_931_146_3;

    #[test]
    fn sbar_reference_values() {
        assert!((sbar_scalar(2.0, 1.0).unwrap() - SBAR).abs() < 1e-12);
        // larger B decreases Sbar toward 1
        let s10 = sbar_scalar(2.0, 10.0).unwrap();
        assert!((s10 - 1.039_618_909_304_649_4).abs() < 1e-12);
        assert!(s10 < sbar_scalar(2.0, 1.0).unwrap());
    }

    #[test]
    fn sbar_satisfies_dare() {
        let (a, b) = (2.0, 1.0);
        let s = sbar_scalar(a, b).unwrap();
        let res = a * a * s - s - (a * b * s) * (a * b * s) / (b * b * s + 1.0) + 1.0;
        assert!(res.abs() <= 1e-12, "residual {res}");
    }

    #[test]
    fn sbar_rejects_stable_a() {
        assert!(matches!(sbar_scalar(0.9, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pstar_reference_and_identity() {
        let p = pstar_scalar(2.0, 1.0, 1.0);
        assert!((p - PSTAR).abs() < 1e-12);
        // 1 + snr(W + A²P*) = A² + W/P*
        let lhs = 1.0 + 1.0 * (1.0 + 4.0 * p);
        let rhs = 4.0 + 1.0 / p;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pstar_degenerate_snr() {
        assert!((pstar_scalar(0.5, 1.0, 0.0) - 1.0 / 0.75).abs() < 1e-12);
        assert!(pstar_scalar(2.0, 1.0, 0.0).is_infinite());
    }

    #[test]
    fn rate_reference_value() {
        let sol = ScalarSolution::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((sol.sbar - SBAR).abs() < 1e-12);
        assert!((sol.theta - THETA).abs() < 1e-12);
        assert!((sol.gamma_threshold - THRESHOLD).abs() < 1e-10);
        let r = sol.rate_nats(10.0).unwrap();
        assert!((r - RATE_AT_10).abs() < 1e-12, "rate {r}");
        let r2 = sol.rate_nats_reparam(10.0).unwrap();
        assert!((r - r2).abs() < 1e-12);
    }

    #[test]
    fn rate_zero_at_and_beyond_threshold() {
        let sol = ScalarSolution::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        // g(P*) = 1 makes the rate continuous at the threshold
        let g = stationary_info_ratio(sol.pstar, 2.0, 1.0, 1.0);
        assert!((g - 1.0).abs() < 1e-12);
        let at = sol.rate_nats(sol.gamma_threshold).unwrap();
        assert!(at.abs() < 1e-10);
        assert_eq!(sol.rate_nats(16.0).unwrap(), 0.0);
        assert_eq!(sol.rate_nats(100.0).unwrap(), 0.0);
    }

    #[test]
    fn rate_without_side_information() {
        let sol = ScalarSolution::new(2.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(sol.gamma_threshold.is_infinite());
        let r = sol.rate_nats(10.0).unwrap();
        assert!((r - RATE_NO_Y_AT_10).abs() < 1e-12, "rate {r}");
        // Γ → ∞: rate → ln|A| (= 1 bit for A = 2)
        let r_inf = sol.rate_nats(1e9).unwrap();
        assert!((r_inf - 2.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn rate_infeasible_budget() {
        let sol = ScalarSolution::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(sol.rate_nats(4.0), Err(Error::Infeasible(_))));
        assert!(matches!(
            sol.rate_nats(4.236_067_977_499_79),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn info_ratio_increasing() {
        let mut prev = 0.0;
        for i in 1..200 {
            let p = i as f64 * 0.05;
            let g = stationary_info_ratio(p, 2.0, 1.0, 1.0);
            assert!(g > prev, "not increasing at P = {p}");
            prev = g;
        }
    }

    #[test]
    fn rate_monotone_convex_in_gamma() {
        let sol = ScalarSolution::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let gs: Vec<f64> = (0..60)
            .map(|i| 4.3 + (15.2 - 4.3) * i as f64 / 59.0)
            .collect();
        let rs: Vec<f64> = gs.iter().map(|&g| sol.rate_nats(g).unwrap()).collect();
        for w in rs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for w in rs.windows(3) {
            // midpoint below chord: convexity on an equispaced grid
            assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-9);
        }
    }

    #[test]
    fn side_information_gain_increasing_in_snr() {
        let gamma = 10.0;
        let mut prev = -1.0;
        for i in 0..50 {
            let snr = i as f64 * 0.2;
            let sol = ScalarSolution::new(2.0, 1.0, 1.0, snr.sqrt(), 1.0).unwrap();
            let gain = 0.5
                * (1.0 + snr * (1.0 + 4.0 * sol.d_of_gamma(gamma))).ln();
            assert!(gain >= prev - 1e-12);
            assert!(gain >= 0.0);
            prev = gain;
        }
    }
}
