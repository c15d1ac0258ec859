//! Numerical checks of the change-of-variable formulas: Itô-Föllmer for
//! `C^2` functions, Itô-Tanaka with a local-time term for convex functions of
//! mixed processes, and the transformed version for `S = g(X)`.

use crate::convex_fn::{C2Function, ConvexCombination, MonotoneMap};
use crate::error::{Error, Result};
use crate::gaussian_paths::MixedEnsemble;
use crate::integrators::{
    default_beta, gls_integral, holder_exponent_estimate, rs_forward_sum, rs_forward_sum_until, Partition, StopRule,
};
use crate::local_time::{default_epsilon, estimate_local_time_with, FieldOptions, WindowRule, DEFAULT_LEVELS};
use crate::path::{BracketPath, SampledPath, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralMethod {
    Follmer,
    Gls,
    Mixed,
}

/// Which clock weighs the window indicator of the local-time estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockSource {
    /// Squared increments of the path along the partition.
    #[default]
    Realized,
    /// The martingale bracket carried by the ensemble.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeConfig {
    /// Bandwidth; `None` uses `2 sqrt(h/T) std(dY)`.
    pub epsilon: Option<f64>,
    pub clock: ClockSource,
    pub rule: WindowRule,
    /// Levels per curvature-density segment.
    pub levels: usize,
    /// Also evaluate the Hölder part of the integral as a generalized
    /// Lebesgue-Stieltjes integral when a feasible order exists.
    pub gls_cross_check: bool,
}

impl Default for LocalTimeConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            clock: ClockSource::Realized,
            rule: WindowRule::Interpolated,
            levels: DEFAULT_LEVELS,
            gls_cross_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TanakaReport {
    /// `f(Y_T) - f(Y_0)`.
    pub lhs: f64,
    pub integral: f64,
    pub method: IntegralMethod,
    /// `1/2 int L_T^a f''(da)`.
    pub lt_term: f64,
    /// `lhs - integral - lt_term`.
    pub residual: f64,
    pub grid_n: usize,
    pub epsilon: Option<f64>,
    /// `max_u |Y_u - Y_0|`.
    pub payoff_scale: f64,
    pub gls_cross_check: Option<f64>,
    pub notices: Vec<String>,
}

impl TanakaReport {
    /// `|residual| / max(|lhs|, |lt_term|, payoff_scale)`.
    pub fn relative(&self) -> f64 {
        let d = self.lhs.abs().max(self.lt_term.abs()).max(self.payoff_scale);
        if d == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / d
        }
    }
}

/// The path read at the partition points only.
pub(crate) fn restrict(path: &SampledPath, partition: &Partition) -> Result<SampledPath> {
    let idx = partition.indices_on(path.grid())?;
    if idx.len() == path.len() {
        return Ok(path.clone());
    }
    let grid = TimeGrid::new(partition.times().to_vec())?;
    let values = idx.iter().map(|&i| path.values()[i]).collect();
    SampledPath::new(grid, values, path.seed(), path.label())
}

fn restrict_bracket(b: &BracketPath, partition: &Partition) -> Result<BracketPath> {
    let idx = partition.indices_on(b.grid())?;
    if idx.len() == b.values().len() {
        return Ok(b.clone());
    }
    let grid = TimeGrid::new(partition.times().to_vec())?;
    let base = b.values()[idx[0]];
    BracketPath::new(grid, idx.iter().map(|&i| b.values()[i] - base).collect())
}

/// Sum of squared increments as a clock on the path's own grid.
pub fn realized_clock(y: &SampledPath) -> Result<BracketPath> {
    let inc: Vec<f64> = y.values().windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    BracketPath::from_increments(y.grid(), &inc)
}

fn payoff_scale(y: &SampledPath) -> f64 {
    let y0 = y.first();
    y.values().iter().fold(0.0f64, |m, &v| m.max((v - y0).abs()))
}

/// `f(X_T) - f(X_0) - sum f'(X) dX - 1/2 sum f''(X) d<X>` along the partition.
/// Without a clock the bracket term is omitted.
pub fn ito_residual_smooth(
    f: &dyn C2Function,
    x: &SampledPath,
    partition: &Partition,
    clock: Option<&BracketPath>,
) -> Result<f64> {
    let idx = partition.indices_on(x.grid())?;
    let v = x.values();
    let mut integral = 0.0;
    let mut bracket = 0.0;
    if let Some(c) = clock {
        if !c.grid().same_as(x.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    for w in idx.windows(2) {
        let (a, b) = (v[w[0]], v[w[1]]);
        integral += f.d1(a) * (b - a);
        if let Some(c) = clock {
            bracket += 0.5 * f.d2(a) * (c.values()[w[1]] - c.values()[w[0]]);
        }
    }
    let lhs = f.value(v[idx[idx.len() - 1]]) - f.value(v[idx[0]]);
    Ok(lhs - integral - bracket)
}

/// Itô-Tanaka residual for one draw of a mixed model.
pub fn tanaka_residual(
    f: &ConvexCombination,
    ensemble: &MixedEnsemble,
    partition: &Partition,
    config: &LocalTimeConfig,
) -> Result<TanakaReport> {
    let mut report = tanaka_on_path(f, &ensemble.y, Some(&ensemble.bracket), partition, config)?;
    if config.gls_cross_check {
        match gls_cross_check(f, ensemble, partition) {
            Ok(v) => {
                report.gls_cross_check = Some(v);
            }
            Err(e) => report.notices.push(format!("generalized Lebesgue-Stieltjes cross-check skipped: {e}")),
        }
    }
    Ok(report)
}

/// Itô-Tanaka residual for a single path; `bracket` is needed only for the analytic clock.
pub fn tanaka_on_path(
    f: &ConvexCombination,
    y: &SampledPath,
    bracket: Option<&BracketPath>,
    partition: &Partition,
    config: &LocalTimeConfig,
) -> Result<TanakaReport> {
    let yp = restrict(y, partition)?;
    let clock = match config.clock {
        ClockSource::Realized => realized_clock(&yp)?,
        ClockSource::Analytic => {
            let b = bracket.ok_or_else(|| Error::Precondition("the analytic clock needs a bracket".into()))?;
            restrict_bracket(b, partition)?
        }
    };
    let deriv = yp.map(|v| f.left_derivative(v));
    let integral = rs_forward_sum(&deriv, &yp, &Partition::from_grid(yp.grid()))?;
    let lhs = f.eval(yp.last()) - f.eval(yp.first());
    let epsilon = config.epsilon.unwrap_or_else(|| default_epsilon(&yp));
    let (lt_term, notices) =
        if f.has_curvature() { curvature_pairing(f, &yp, &clock, epsilon, config)? } else { (0.0, Vec::new()) };
    Ok(TanakaReport {
        lhs,
        integral,
        method: IntegralMethod::Follmer,
        lt_term,
        residual: lhs - integral - lt_term,
        grid_n: yp.len(),
        epsilon: Some(epsilon),
        payoff_scale: payoff_scale(&yp),
        gls_cross_check: None,
        notices,
    })
}

/// `int L_T^a mu(da)` with `mu = f''/2`: atoms read at their own levels,
/// density segments by the trapezoid over `config.levels` points each.
fn curvature_pairing(
    f: &ConvexCombination,
    y: &SampledPath,
    clock: &BracketPath,
    epsilon: f64,
    config: &LocalTimeConfig,
) -> Result<(f64, Vec<String>)> {
    let (lo, hi) = (y.min() - epsilon, y.max() + epsilon);
    let mut levels: Vec<f64> = f.atoms().iter().map(|a| a.location).collect();
    let mut segments = Vec::new();
    if let Some(d) = f.density() {
        let n = config.levels.max(2);
        for (w, &rho) in d.breaks().windows(2).zip(d.values()) {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            if b > a && rho != 0.0 {
                let pts: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
                levels.extend(&pts);
                segments.push((pts, rho));
            }
        }
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let opts = FieldOptions { rule: config.rule, time_stride: y.len() };
    let field = estimate_local_time_with(y, clock, &levels, epsilon, &opts)?;
    let row = field.terminal();
    let at = |a: f64| row[levels.partition_point(|&l| l < a)];
    let mut total: f64 = f.atoms().iter().map(|a| a.weight * at(a.location)).sum();
    for (pts, rho) in segments {
        total += rho * (1..pts.len()).map(|i| 0.5 * (at(pts[i]) + at(pts[i - 1])) * (pts[i] - pts[i - 1])).sum::<f64>();
    }
    Ok((total, field.warnings().to_vec()))
}

/// Föllmer sum against the martingale part plus the generalized integral against the Hölder part.
fn gls_cross_check(f: &ConvexCombination, ensemble: &MixedEnsemble, partition: &Partition) -> Result<f64> {
    let y = restrict(&ensemble.y, partition)?;
    let m = restrict(&ensemble.m, partition)?;
    let x = restrict(&ensemble.x, partition)?;
    let deriv = y.map(|v| f.left_derivative(v));
    let alpha = holder_exponent_estimate(&deriv);
    let eta = holder_exponent_estimate(&x);
    let beta = default_beta(alpha, eta)?;
    let against_m = rs_forward_sum(&deriv, &m, &Partition::from_grid(y.grid()))?;
    Ok(against_m + gls_integral(&deriv, &x, beta)?.value)
}

/// Residual of `f(S_tau) = f(S_0) + int_0^tau f'_-(S) dS` for `S = g(X)` with a
/// zero-bracket `X`; `stop` is resolved on `S`.
pub fn transformed_residual(
    g: &MonotoneMap,
    f: &ConvexCombination,
    x: &SampledPath,
    partition: &Partition,
    stop: Option<&StopRule>,
) -> Result<TanakaReport> {
    g.check_range(x.min(), x.max())?;
    let s = restrict(x, partition)?.map(|v| g.apply(v));
    let deriv = s.map(|v| f.left_derivative(v));
    let full = Partition::from_grid(s.grid());
    let (end, integral) = match stop {
        None => (s.len() - 1, rs_forward_sum(&deriv, &s, &full)?),
        Some(rule) => {
            let (i, tau) = rule.resolve(&s)?;
            (i, rs_forward_sum_until(&deriv, &s, &full, tau)?)
        }
    };
    let sv = s.values();
    let lhs = f.eval(sv[end]) - f.eval(sv[0]);
    let scale = sv[..=end].iter().fold(0.0f64, |m, &v| m.max((v - sv[0]).abs()));
    Ok(TanakaReport {
        lhs,
        integral,
        method: IntegralMethod::Follmer,
        lt_term: 0.0,
        residual: lhs - integral,
        grid_n: s.len(),
        epsilon: None,
        payoff_scale: scale,
        gls_cross_check: None,
        notices: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_fn::{PiecewiseDensity, SmoothFn};

    fn wiggle(n: usize) -> SampledPath {
        let g = TimeGrid::uniform(1.0, n).unwrap();
        SampledPath::from_fn(&g, "w", |t| (9.0 * t).sin() + 0.3 * (31.0 * t).cos())
    }

    #[test]
    fn identity_function_telescopes() {
        let x = wiggle(512);
        let id = SmoothFn::new(|x| x, |_| 1.0, |_| 0.0);
        let r = ito_residual_smooth(&id, &x, &Partition::from_grid(x.grid()), None).unwrap();
        assert!(r.abs() < 1e-13);
    }

    #[test]
    fn square_with_realized_clock_is_exact() {
        let x = wiggle(512);
        let clock = realized_clock(&x).unwrap();
        let r = ito_residual_smooth(&SmoothFn::square(), &x, &Partition::from_grid(x.grid()), Some(&clock)).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }

    #[test]
    fn linear_payoff_has_no_local_time() {
        let y = wiggle(256);
        let f = ConvexCombination::linear(1.5, 2.0);
        let r = tanaka_on_path(&f, &y, None, &Partition::from_grid(y.grid()), &LocalTimeConfig::default()).unwrap();
        assert_eq!(r.lt_term, 0.0);
        assert!(r.residual.abs() < 1e-10);
    }

    #[test]
    fn call_below_path_telescopes() {
        let y = wiggle(256);
        let f = ConvexCombination::call(y.min() - 1.0);
        let r = tanaka_on_path(&f, &y, None, &Partition::from_grid(y.grid()), &LocalTimeConfig::default()).unwrap();
        assert_eq!(r.lt_term, 0.0);
        assert!(r.residual.abs() < 1e-12);
    }

    #[test]
    fn density_curvature_matches_smooth_formula() {
        // f = x^2 on the path range: mu = 1 there, so the local-time term is the clock mass
        let y = wiggle(4096);
        let part = Partition::from_grid(y.grid());
        let d = PiecewiseDensity::new(vec![-3.0, 3.0], vec![1.0]).unwrap();
        let f = ConvexCombination::with_density(d);
        let cfg = LocalTimeConfig { epsilon: Some(0.01), levels: 801, ..Default::default() };
        let r = tanaka_on_path(&f, &y, None, &part, &cfg).unwrap();
        let clock = realized_clock(&y).unwrap();
        let smooth = ito_residual_smooth(&SmoothFn::square(), &y, &part, Some(&clock)).unwrap();
        assert!((r.lt_term - clock.terminal()).abs() < 2e-3 * clock.terminal(), "{r:?}");
        assert!((r.residual - smooth).abs() < 2e-3 * clock.terminal());
    }

    #[test]
    fn analytic_clock_requires_bracket() {
        let y = wiggle(64);
        let cfg = LocalTimeConfig { clock: ClockSource::Analytic, ..Default::default() };
        let f = ConvexCombination::call(0.0);
        assert!(matches!(
            tanaka_on_path(&f, &y, None, &Partition::from_grid(y.grid()), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn transformed_identity_matches_direct_sum() {
        let x = wiggle(1024);
        let part = Partition::from_grid(x.grid());
        let f = ConvexCombination::call(0.2);
        let r = transformed_residual(&MonotoneMap::Identity, &f, &x, &part, None).unwrap();
        let deriv = x.map(|v| f.left_derivative(v));
        let direct = rs_forward_sum(&deriv, &x, &part).unwrap();
        assert_eq!(r.integral, direct);
        assert_eq!(r.lhs, f.eval(x.last()) - f.eval(x.first()));
    }

    #[test]
    fn stopped_identity_uses_values_at_tau() {
        let x = wiggle(1024);
        let part = Partition::from_grid(x.grid());
        let f = ConvexCombination::call(0.0);
        let rule = StopRule::first_hit_up(0.8, 1.0);
        let r = transformed_residual(&MonotoneMap::Exp, &f, &x, &part, Some(&rule)).unwrap();
        let (i, _) = rule.resolve(&x.map(f64::exp)).unwrap();
        assert!((r.lhs - (f.eval(x.values()[i].exp()) - f.eval(x.first().exp()))).abs() < 1e-15);
    }

    #[test]
    fn coarser_partitions_restrict_the_path() {
        let x = wiggle(1024);
        let coarse = Partition::dyadic(1.0, 6).unwrap();
        let f = ConvexCombination::call(0.3);
        let r = tanaka_on_path(&f, &x, None, &coarse, &LocalTimeConfig::default()).unwrap();
        assert_eq!(r.grid_n, 65);
    }
}
