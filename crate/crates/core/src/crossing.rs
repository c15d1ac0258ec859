//! Level-crossing probabilities `P(X_s < a < X_t)` for centred Gaussian
//! processes: exact values by quadrature, Monte Carlo, and the crossing bounds
//! with their existential constants calibrated on a grid.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_paths::{eval_kernel, replica_rng, CovarianceModel};
use crate::numeric::{integrate, normal_cdf, normal_pdf, normal_sf};

/// Second moments of `(X_s, X_t)` and the derived conditional quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingGeometry {
    pub s: f64,
    pub t: f64,
    pub r_ss: f64,
    pub r_tt: f64,
    pub r_ts: f64,
    /// Conditional variance of `X_t` given `X_s`.
    pub sigma2: f64,
    /// `1/sigma_bar^2 = 1/sigma^2 + R_ss / R_ts^2`.
    pub sigma_bar2: f64,
    /// `R_ss / R_ts`.
    pub ratio: f64,
    pub v_star: f64,
}

impl CrossingGeometry {
    pub fn new(model: &CovarianceModel, s: f64, t: f64) -> Result<Self> {
        if !(s > 0.0 && s < t) {
            return Err(Error::InvalidParameter(format!("need 0 < s < t, got s = {s}, t = {t}")));
        }
        let k = eval_kernel(model, s, t)?;
        let (r_ss, r_tt, r_ts) = (k.vs, k.vt, k.r);
        if !(r_ss > 0.0) {
            return Err(Error::InvalidParameter(format!("R(s,s) = {r_ss} must be positive")));
        }
        let sigma2 = ((r_ss * r_tt - r_ts * r_ts) / r_ss).max(0.0);
        let sigma_bar2 =
            if sigma2 == 0.0 || r_ts == 0.0 { 0.0 } else { sigma2 * r_ts * r_ts / (r_ts * r_ts + sigma2 * r_ss) };
        Ok(Self { s, t, r_ss, r_tt, r_ts, sigma2, sigma_bar2, ratio: r_ss / r_ts, v_star: model.sup_variance()? })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `W(t,s) = R_tt + R_ss - 2 R_ts`.
    pub fn w(&self) -> f64 {
        (self.r_tt + self.r_ss - 2.0 * self.r_ts).max(0.0)
    }
}

/// `P(X_s < a < X_t)` with absolute accuracy about `1e-10`.
pub fn exact_crossing_prob(model: &CovarianceModel, s: f64, t: f64, a: f64) -> Result<f64> {
    Ok(exact_from_geometry(&CrossingGeometry::new(model, s, t)?, a))
}

fn exact_from_geometry(g: &CrossingGeometry, a: f64) -> f64 {
    let sd = g.r_ss.sqrt();
    let slope = g.r_ts / g.r_ss;
    let sigma = g.sigma();
    if sigma == 0.0 {
        // X_t = slope * X_s exactly
        let p = if slope > 0.0 {
            normal_cdf(a / sd) - normal_cdf(a / (slope * sd))
        } else if slope < 0.0 {
            normal_cdf(a.min(a / slope) / sd)
        } else if a < 0.0 {
            normal_cdf(a / sd)
        } else {
            0.0
        };
        return p.max(0.0);
    }
    // u = X_s / sd, integrand P(sigma Y > a - slope sd u) phi(u) on u < a / sd
    let hi = a / sd;
    let lo = -12.0;
    if hi <= lo {
        return 0.0;
    }
    let f = |u: f64| normal_sf((a - slope * sd * u) / sigma) * normal_pdf(u);
    let mut cuts = vec![lo];
    if slope != 0.0 {
        let centre = a / (slope * sd);
        for k in [-8.0, 0.0, 8.0] {
            let c = centre + k * sigma / (slope.abs() * sd);
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-13)).sum::<f64>().max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_samples: usize,
}

const MC_BLOCK: usize = 8192;

/// Frequency of `{X_s < a < X_t}` over exact bivariate draws; block `b` uses stream `b` of `seed`.
pub fn mc_crossing_prob(
    model: &CovarianceModel,
    s: f64,
    t: f64,
    a: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {n_samples}")));
    }
    let g = CrossingGeometry::new(model, s, t)?;
    let (sd, slope, sigma) = (g.r_ss.sqrt(), g.r_ts / g.r_ss, g.sigma());
    let blocks = n_samples.div_ceil(MC_BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(seed, b as u64);
            let m = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            (0..m)
                .filter(|_| {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let xs = sd * z1;
                    let xt = slope * xs + sigma * z2;
                    xs < a && a < xt
                })
                .count()
        })
        .sum();
    let p = hits as f64 / n_samples as f64;
    Ok(McEstimate { estimate: p, standard_error: (p * (1.0 - p) / n_samples as f64).sqrt(), n_samples })
}

/// `P(Z > a) <= exp(-a^2/2) / (sqrt(2 pi) a)`.
pub fn tail_bound(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("the tail bound needs a > 0, got {a}")));
    }
    Ok(normal_pdf(a) / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCase {
    /// `ratio (a - 1) < a`: four terms.
    CaseI,
    /// `ratio (a - 1) >= a`: one term.
    CaseII,
}

pub fn classify(g: &CrossingGeometry, a: f64) -> BoundCase {
    if g.ratio * (a - 1.0) < a {
        BoundCase::CaseI
    } else {
        BoundCase::CaseII
    }
}

/// The bound terms with every unspecified constant set to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawTerms {
    pub case: BoundCase,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// Carries no constant.
    pub i4: f64,
}

pub fn raw_terms(g: &CrossingGeometry, a: f64) -> RawTerms {
    let sigma = g.sigma();
    let sv = g.r_ss.sqrt();
    let i1 = (sv * sigma).min(g.sigma2) * (-0.5 * a * a).exp();
    let case = classify(g, a);
    if case == BoundCase::CaseII {
        return RawTerms { case, i1, i2: 0.0, i3: 0.0, i4: 0.0 };
    }
    let tail = (-(a * a).min((a - 1.0).powi(2)) / (2.0 * g.v_star)).exp();
    let window = if a.abs() > 2.0 { 1.0 } else { a - g.ratio * (a - 1.0) };
    let i2 = tail * sigma / sv * window;
    let i3 = g.ratio * sigma / sv * tail;
    let i4 = (-a * a / (2.0 * g.v_star)).exp() / sv * (a * (1.0 - g.ratio)).abs();
    RawTerms { case, i1, i2, i3, i4 }
}

/// `sqrt(W/V(s)) [1 + ratio + |a| exp(-a^2/2V*) / sqrt(V(s)) max(1, ratio)]`.
pub fn raw_universal(g: &CrossingGeometry, a: f64) -> f64 {
    let sv = g.r_ss.sqrt();
    let lead = (g.w() / g.r_ss).sqrt();
    lead * (1.0 + g.ratio + a.abs() * (-a * a / (2.0 * g.v_star)).exp() / sv * g.ratio.max(1.0))
}

/// Calibrated values of the existential constants, one per bound formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub case_i: f64,
    pub case_ii: f64,
    pub universal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub case: BoundCase,
    pub i1: f64,
    pub i2: Option<f64>,
    pub i3: Option<f64>,
    pub i4: Option<f64>,
    pub total: f64,
    pub probability: f64,
    pub satisfied: bool,
}

fn check_unit(g: &CrossingGeometry) -> Result<()> {
    if g.v_star > 1.0 + 1e-12 {
        Err(Error::NeedsRescale(g.v_star))
    } else {
        Ok(())
    }
}

fn check_positive(g: &CrossingGeometry) -> Result<()> {
    if g.r_ts > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("covariance R(t,s) = {} must be positive", g.r_ts)))
    }
}

pub fn crossing_bound(model: &CovarianceModel, s: f64, t: f64, a: f64, c: &BoundConstants) -> Result<BoundReport> {
    let g = CrossingGeometry::new(model, s, t)?;
    check_unit(&g)?;
    check_positive(&g)?;
    let raw = raw_terms(&g, a);
    let probability = exact_from_geometry(&g, a);
    let report = match raw.case {
        BoundCase::CaseI => {
            let (i1, i2, i3) = (c.case_i * raw.i1, c.case_i * raw.i2, c.case_i * raw.i3);
            let total = i1 + i2 + i3 + raw.i4;
            BoundReport {
                case: raw.case,
                i1,
                i2: Some(i2),
                i3: Some(i3),
                i4: Some(raw.i4),
                total,
                probability,
                satisfied: probability <= total,
            }
        }
        BoundCase::CaseII => {
            let total = c.case_ii * raw.i1;
            BoundReport {
                case: raw.case,
                i1: total,
                i2: None,
                i3: None,
                i4: None,
                total,
                probability,
                satisfied: probability <= total,
            }
        }
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalReport {
    pub bound: f64,
    pub probability: f64,
    pub satisfied: bool,
}

pub fn universal_bound(model: &CovarianceModel, s: f64, t: f64, a: f64, c: f64) -> Result<UniversalReport> {
    let g = CrossingGeometry::new(model, s, t)?;
    check_unit(&g)?;
    check_positive(&g)?;
    let bound = c * raw_universal(&g, a);
    let probability = exact_from_geometry(&g, a);
    Ok(UniversalReport { bound, probability, satisfied: probability <= bound })
}

/// Smallest constants making every bound hold on the grid, times `margin`.
pub fn calibrate(models: &[CovarianceModel], points: &[(f64, f64, f64)], margin: f64) -> Result<BoundConstants> {
    let mut c = BoundConstants { case_i: 0.0, case_ii: 0.0, universal: 0.0 };
    for model in models {
        for &(s, t, a) in points {
            if t > model.horizon {
                continue;
            }
            let g = CrossingGeometry::new(model, s, t)?;
            check_unit(&g)?;
            check_positive(&g)?;
            let p = exact_from_geometry(&g, a);
            if p == 0.0 {
                continue;
            }
            let raw = raw_terms(&g, a);
            let (slot, need) = match raw.case {
                BoundCase::CaseI => (&mut c.case_i, ((p - raw.i4).max(0.0), raw.i1 + raw.i2 + raw.i3)),
                BoundCase::CaseII => (&mut c.case_ii, (p, raw.i1)),
            };
            *slot = slot.max(ratio_or_fail(need.0, need.1, model, s, t, a)?);
            c.universal = c.universal.max(ratio_or_fail(p, raw_universal(&g, a), model, s, t, a)?);
        }
    }
    Ok(BoundConstants { case_i: margin * c.case_i, case_ii: margin * c.case_ii, universal: margin * c.universal })
}

fn ratio_or_fail(num: f64, den: f64, model: &CovarianceModel, s: f64, t: f64, a: f64) -> Result<f64> {
    if num == 0.0 {
        return Ok(0.0);
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::Numerical(format!(
            "bound term vanishes while the probability is positive for {} at (s, t, a) = ({s}, {t}, {a})",
            model.label
        )))
    }
}

/// Branch, both sides and verdict of the covariance-ratio inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    /// `true` when `R(s,s) <= R(t,s)`.
    pub first_branch: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn ratio_inequality_check(model: &CovarianceModel, s: f64, t: f64) -> Result<RatioCheck> {
    if !(s > 0.0 && s <= t) {
        return Err(Error::InvalidParameter(format!("need 0 < s <= t, got s = {s}, t = {t}")));
    }
    let k = eval_kernel(model, s, t)?;
    if !(k.r > 0.0) {
        return Err(Error::InvalidParameter(format!("covariance R(t,s) = {} must be positive", k.r)));
    }
    let ratio = k.vs / k.r;
    let lead = (k.w.max(0.0) / k.vs).sqrt();
    let first_branch = k.vs <= k.r;
    let (lhs, rhs) = if first_branch { (1.0 - ratio, lead) } else { (ratio - 1.0, lead * ratio) };
    Ok(RatioCheck { first_branch, lhs, rhs, pass: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()) })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn ordered_points(times: &[f64], levels: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        for &t in &times[i + 1..] {
            for &a in levels {
                out.push((s, t, a));
            }
        }
    }
    out
}

/// Calibration points on `[0, T]`: seven times and nine levels.
pub fn calibration_points(horizon: f64) -> Vec<(f64, f64, f64)> {
    let times: Vec<f64> = linspace(0.1, 1.0, 7).iter().map(|u| u * horizon).collect();
    ordered_points(&times, &linspace(-2.0, 2.0, 9))
}

/// Held-out points: the calibration times and levels with every gap bisected.
pub fn held_out_points(horizon: f64) -> Vec<(f64, f64, f64)> {
    let times: Vec<f64> = linspace(0.1, 1.0, 13).iter().map(|u| u * horizon).collect();
    ordered_points(&times, &linspace(-2.0, 2.0, 17))
}

/// The 5 x 5 x 5 Monte Carlo validation grid (pairs with `s < t`).
pub fn validation_points(horizon: f64) -> Vec<(f64, f64, f64)> {
    let times: Vec<f64> = linspace(0.2, 1.0, 5).iter().map(|u| u * horizon).collect();
    ordered_points(&times, &linspace(-1.0, 1.0, 5))
}
