//! Numerical diagnostics for the four defining conditions of the class `X^alpha`:
//! (i) positive covariance, (ii) `w*(t) ~ t^{2 alpha}` at zero,
//! (iii) `V(s) >= c s^2` near zero, (iv) bounded `R(s,s)/R(t,s)` near the diagonal.

use super::kernel::worst_case_increment;
use super::model::CovarianceModel;
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, logspace};

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipConfig {
    /// Fit window for the `w*` exponent, as fractions of the horizon.
    pub fit_window: (f64, f64),
    pub fit_points: usize,
    pub exponent_tol: f64,
    /// RMS log-residual above which the fit is considered unreliable.
    pub residual_tol: f64,
    /// `delta` as a fraction of the horizon.
    pub delta_fraction: f64,
    /// Smallest acceptable estimate of `c` in `V(s) >= c s^2`.
    pub variance_floor: f64,
    /// Largest acceptable value of `sup R(s,s)/R(t,s)`.
    pub ratio_bound: f64,
    pub ratio_grid: usize,
    pub positivity_grid: usize,
    /// Grid resolution for `w*` on models without stationary increments.
    pub wstar_resolution: usize,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        Self {
            fit_window: (1e-4, 1e-1),
            fit_points: 24,
            exponent_tol: 0.03,
            residual_tol: 0.05,
            delta_fraction: 0.1,
            variance_floor: 1e-6,
            ratio_bound: 1e3,
            ratio_grid: 50,
            positivity_grid: 40,
            wstar_resolution: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveCovariance {
    pub passed: bool,
    /// Pair `(s, t)` with the smallest covariance and that covariance.
    pub worst: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WStarFit {
    pub passed: bool,
    pub exponent: f64,
    pub prefactor: f64,
    pub residual: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceLower {
    pub passed: bool,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSup {
    pub passed: bool,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub alpha: f64,
    pub positive_r: PositiveCovariance,
    pub w_star: WStarFit,
    pub variance_lower: VarianceLower,
    pub ratio_sup: RatioSup,
    pub verdict: Verdict,
}

impl MembershipReport {
    pub fn all_passed(&self) -> bool {
        self.positive_r.passed && self.w_star.passed && self.variance_lower.passed && self.ratio_sup.passed
    }
}

pub fn check_class_membership(
    model: &CovarianceModel,
    alpha: f64,
    config: &MembershipConfig,
) -> Result<MembershipReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if config.fit_points < 20 {
        return Err(Error::InvalidParameter("the w* fit needs at least 20 points".into()));
    }
    let horizon = model.horizon;

    let pts = logspace(horizon * 1e-4, horizon, config.positivity_grid);
    let mut worst = (pts[0], pts[0], f64::INFINITY);
    for (i, &s) in pts.iter().enumerate() {
        for &t in &pts[i..] {
            let r = model.covariance(s, t)?;
            if r < worst.2 {
                worst = (s, t, r);
            }
        }
    }
    let positive_r = PositiveCovariance { passed: worst.2 > 0.0, worst };

    let ts = logspace(horizon * config.fit_window.0, horizon * config.fit_window.1, config.fit_points);
    let mut lx = Vec::with_capacity(ts.len());
    let mut ly = Vec::with_capacity(ts.len());
    for &t in &ts {
        let w = worst_case_increment(model, t, config.wstar_resolution)?;
        if w > 0.0 {
            lx.push(t.ln());
            ly.push(w.ln());
        }
    }
    let w_star = if lx.len() < config.fit_points {
        WStarFit { passed: false, exponent: f64::NAN, prefactor: 0.0, residual: f64::INFINITY, reliable: true }
    } else {
        let fit = linear_fit(&lx, &ly);
        let reliable = fit.residual <= config.residual_tol;
        WStarFit {
            passed: reliable && (fit.slope - 2.0 * alpha).abs() <= config.exponent_tol,
            exponent: fit.slope,
            prefactor: fit.intercept.exp(),
            residual: fit.residual,
            reliable,
        }
    };

    let delta = config.delta_fraction * horizon;
    let mut c = f64::INFINITY;
    for s in logspace(delta * 1e-6, delta, 60) {
        c = c.min(model.variance(s)? / (s * s));
    }
    let variance_lower = VarianceLower { passed: c >= config.variance_floor, c, delta };

    let mut sup: f64 = 0.0;
    let n = config.ratio_grid;
    for t in logspace(2.0 * delta * 1e-6, 2.0 * delta * (1.0 - 1e-9), n) {
        for j in 0..n {
            let s = 0.5 * t * (1.0 + j as f64 / (n - 1) as f64);
            let rts = model.covariance(s, t)?;
            let q = if rts > 0.0 { model.covariance(s, s)? / rts } else { f64::INFINITY };
            sup = sup.max(q);
        }
    }
    let ratio_sup = RatioSup { passed: sup.is_finite() && sup <= config.ratio_bound, sup };

    let hard_fail = !positive_r.passed || !variance_lower.passed || !ratio_sup.passed;
    let verdict = if hard_fail {
        Verdict::NonMember
    } else if !w_star.reliable {
        Verdict::Inconclusive
    } else if w_star.passed {
        Verdict::Member
    } else {
        Verdict::NonMember
    };
    Ok(MembershipReport { alpha, positive_r, w_star, variance_lower, ratio_sup, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::{BracketFn, StationaryKernel};

    #[test]
    fn fbm_members() {
        let cfg = MembershipConfig::default();
        for h in [0.4, 0.5, 0.6, 0.75, 0.9] {
            let r = check_class_membership(&CovarianceModel::fbm(h, 1.0).unwrap(), h, &cfg).unwrap();
            assert_eq!(r.verdict, Verdict::Member, "H={h}: {r:?}");
            assert!((r.w_star.exponent - 2.0 * h).abs() < 0.03);
        }
    }

    #[test]
    fn wrong_alpha_is_rejected() {
        let r = check_class_membership(&CovarianceModel::fbm(0.6, 1.0).unwrap(), 0.5, &MembershipConfig::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::NonMember);
        assert!(!r.w_star.passed);
    }

    #[test]
    fn fractional_ou_member() {
        let m = CovarianceModel::stationary(StationaryKernel::PowerExponential { rate: 1.0, power: 1.2 }, 1.0).unwrap();
        let r = check_class_membership(&m, 0.6, &MembershipConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Member, "{r:?}");
    }

    #[test]
    fn quartic_variance_fails_lower_bound() {
        let m = CovarianceModel::martingale(BracketFn::Power { scale: 1.0, exponent: 4.0 }, 1.0).unwrap();
        let r = check_class_membership(&m, 0.5, &MembershipConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NonMember);
        assert!(!r.variance_lower.passed);
        assert!(r.positive_r.passed && r.ratio_sup.passed);
    }

    #[test]
    fn alpha_domain() {
        let m = CovarianceModel::brownian(1.0).unwrap();
        assert!(check_class_membership(&m, 1.0, &MembershipConfig::default()).is_err());
    }
}
