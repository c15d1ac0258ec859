//! Pathwise integrals: forward (Föllmer) sums along partitions, quadratic
//! variation, and the generalized Lebesgue-Stieltjes integral built from a
//! left fractional derivative of the integrand and a right fractional
//! derivative of the integrator.

use crate::error::{Error, Result};
use crate::frac_calc::{besov_w2_norm, check_beta, left_derivative, uniform_step};
use crate::numeric::{gamma, linear_fit};
use crate::path::{BracketPath, SampledPath, TimeGrid};

/// Strictly increasing set of times.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("a partition needs at least two points".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("partition times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `2^level` equal cells of `[0, horizon]`.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self> {
        let grid = TimeGrid::uniform(horizon, 1usize << level)?;
        Ok(Self { times: grid.times().to_vec() })
    }

    pub fn from_grid(grid: &TimeGrid) -> Self {
        Self { times: grid.times().to_vec() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid indices of the partition points.
    pub fn indices_on(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        self.times.iter().map(|&t| grid.index_of(t).ok_or(Error::PartitionNotOnGrid(t))).collect()
    }
}

/// Refining partitions with strictly decreasing mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    levels: Vec<Partition>,
    nested: bool,
}

impl PartitionSequence {
    pub fn new(levels: Vec<Partition>, nested: bool) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("empty partition sequence".into()));
        }
        for w in levels.windows(2) {
            if !(w[1].mesh() < w[0].mesh()) {
                return Err(Error::InvalidParameter(format!(
                    "mesh must strictly decrease, got {} then {}",
                    w[0].mesh(),
                    w[1].mesh()
                )));
            }
            let (a, b) = (&w[0].times, &w[1].times);
            if a[0] != b[0] || a[a.len() - 1] != b[b.len() - 1] {
                return Err(Error::InvalidParameter("levels must share their endpoints".into()));
            }
            if nested && a.iter().any(|t| b.binary_search_by(|x| x.total_cmp(t)).is_err()) {
                return Err(Error::InvalidParameter("levels are not nested".into()));
            }
        }
        Ok(Self { levels, nested })
    }

    /// Dyadic partitions of `[0, horizon]` for every level in `levels`.
    pub fn dyadic(horizon: f64, levels: std::ops::RangeInclusive<u32>) -> Result<Self> {
        let parts = levels.map(|l| Partition::dyadic(horizon, l)).collect::<Result<Vec<_>>>()?;
        Self::new(parts, true)
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn finest(&self) -> &Partition {
        &self.levels[self.levels.len() - 1]
    }

    pub fn is_nested(&self) -> bool {
        self.nested
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-level values of a partition-indexed approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub values: Vec<f64>,
    pub meshes: Vec<f64>,
    pub final_value: f64,
    /// Slope of `log |v_{l+1} - v_l|` against `log mesh` over the last four levels.
    pub rate: Option<f64>,
}

impl ConvergenceRecord {
    fn from_levels(values: Vec<f64>, meshes: Vec<f64>) -> Self {
        let final_value = values[values.len() - 1];
        let rate = fit_rate(&values, &meshes);
        Self { values, meshes, final_value, rate }
    }

    /// `max - min` over the last `k` levels.
    pub fn spread_last(&self, k: usize) -> f64 {
        let tail = &self.values[self.values.len().saturating_sub(k)..];
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

fn fit_rate(values: &[f64], meshes: &[f64]) -> Option<f64> {
    if values.len() < 4 {
        return None;
    }
    let start = values.len() - 4;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for l in start..values.len() - 1 {
        let d = (values[l + 1] - values[l]).abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        x.push(meshes[l + 1].ln());
        y.push(d.ln());
    }
    Some(linear_fit(&x, &y).slope)
}

fn forward_sum_on(f: &[f64], g: &[f64], idx: &[usize]) -> f64 {
    idx.windows(2).map(|w| f[w[0]] * (g[w[1]] - g[w[0]])).sum()
}

/// `sum f(t_{j-1}) (g(t_j) - g(t_{j-1}))` over the whole partition.
pub fn rs_forward_sum(f: &SampledPath, g: &SampledPath, partition: &Partition) -> Result<f64> {
    f.check_same_grid(g)?;
    let idx = partition.indices_on(f.grid())?;
    Ok(forward_sum_on(f.values(), g.values(), &idx))
}

/// Forward sum restricted to partition points in `(0, t]`.
pub fn rs_forward_sum_until(f: &SampledPath, g: &SampledPath, partition: &Partition, t: f64) -> Result<f64> {
    f.check_same_grid(g)?;
    let idx = partition.indices_on(f.grid())?;
    let times = f.times();
    let tol = 1e-12 * f.grid().horizon();
    let m = idx.iter().take_while(|&&i| times[i] <= t + tol).count();
    Ok(forward_sum_on(f.values(), g.values(), &idx[..m]))
}

/// Forward sums along every level of the sequence.
pub fn follmer_limit(f: &SampledPath, g: &SampledPath, seq: &PartitionSequence) -> Result<ConvergenceRecord> {
    f.check_same_grid(g)?;
    let mut values = Vec::with_capacity(seq.len());
    let mut meshes = Vec::with_capacity(seq.len());
    for p in seq.levels() {
        let idx = p.indices_on(f.grid())?;
        values.push(forward_sum_on(f.values(), g.values(), &idx));
        meshes.push(p.mesh());
    }
    Ok(ConvergenceRecord::from_levels(values, meshes))
}

/// Sums of squared increments along each level. The bracket path is built
/// from the finest level and held constant between its partition points.
pub fn quadratic_variation(x: &SampledPath, seq: &PartitionSequence) -> Result<(BracketPath, ConvergenceRecord)> {
    let v = x.values();
    let mut values = Vec::with_capacity(seq.len());
    let mut meshes = Vec::with_capacity(seq.len());
    let mut finest_idx = Vec::new();
    for p in seq.levels() {
        let idx = p.indices_on(x.grid())?;
        values.push(idx.windows(2).map(|w| (v[w[1]] - v[w[0]]).powi(2)).sum());
        meshes.push(p.mesh());
        finest_idx = idx;
    }
    let mut bracket = vec![0.0; v.len()];
    let mut acc = 0.0;
    let mut next = 1;
    for (i, b) in bracket.iter_mut().enumerate() {
        while next < finest_idx.len() && finest_idx[next] <= i {
            acc += (v[finest_idx[next]] - v[finest_idx[next - 1]]).powi(2);
            next += 1;
        }
        if i >= finest_idx[0] {
            *b = acc;
        }
    }
    Ok((BracketPath::new(x.grid().clone(), bracket)?, ConvergenceRecord::from_levels(values, meshes)))
}

/// Result of the generalized Lebesgue-Stieltjes integral over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsResult {
    pub value: f64,
    /// `sup_s |D^{1-beta}_{T-} g_{T-}(s)| * ||f||_{2,beta}`.
    pub bound: f64,
    pub beta: f64,
    pub grid_n: usize,
    pub warnings: Vec<String>,
}

impl GlsResult {
    pub fn within_bound(&self) -> bool {
        self.value.abs() <= self.bound + 1e-6 * (1.0 + self.bound)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlsOptions {
    /// Class index of the process inside `f = f'_-(X)`; enables the `beta < alpha ^ (3 alpha - 1)` check.
    pub integrand_alpha: Option<f64>,
}

/// Empirical Hölder exponent of a path from squared increments at steps `h` and `2h`.
pub fn holder_exponent_estimate(g: &SampledPath) -> f64 {
    let v = g.values();
    let s1: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let s2: f64 = v.windows(3).step_by(2).map(|w| (w[2] - w[0]).powi(2)).sum();
    if s1 == 0.0 || s2 == 0.0 {
        return 1.0;
    }
    let n1 = (v.len() - 1) as f64;
    let n2 = ((v.len() - 1) / 2) as f64;
    // per-cell mean squares scale like h^{2 eta}
    (0.5 * ((s2 / n2) / (s1 / n1)).log2()).clamp(0.0, 1.0)
}

/// Midpoint of `(1 - eta, alpha ^ (3 alpha - 1))`.
pub fn default_beta(alpha: f64, eta: f64) -> Result<f64> {
    let lo = 1.0 - eta;
    let hi = alpha.min(3.0 * alpha - 1.0).min(1.0);
    if !(hi > lo) || hi <= 0.0 {
        return Err(Error::Precondition(format!(
            "no feasible beta: need 1 - eta = {lo:.3} < alpha ^ (3 alpha - 1) = {hi:.3}"
        )));
    }
    Ok(0.5 * (lo.max(0.0) + hi))
}

pub fn gls_integral(f: &SampledPath, g: &SampledPath, beta: f64) -> Result<GlsResult> {
    gls_integral_with(f, g, beta, &GlsOptions::default())
}

/// `int_0^T f dg = -int_0^T (D^beta_{0+} f)(s) (D^{1-beta}_{T-} g_{T-})(s) ds`, all operators real.
///
/// Both derivatives are exact for the piecewise-linear interpolants at the
/// nodes. The pairing is a trapezoid on interior cells; the first and last
/// cells, where one factor is singular or vanishes like a power, are integrated
/// in closed form against the linear interpolant of the other factor.
pub fn gls_integral_with(f: &SampledPath, g: &SampledPath, beta: f64, opts: &GlsOptions) -> Result<GlsResult> {
    check_beta(beta)?;
    f.check_same_grid(g)?;
    let h = uniform_step(f)?;
    let n = f.len() - 1;
    if n < 3 {
        return Err(Error::InvalidGrid("the pairing needs at least three cells".into()));
    }
    let fv = f.values();
    let gv = g.values();
    let gt = gv[n];

    let mut warnings = Vec::new();
    let eta = holder_exponent_estimate(g);
    if 1.0 - beta >= eta {
        warnings.push(format!(
            "integrator Hölder exponent ~{eta:.3} does not exceed 1 - beta = {:.3}; the W1 norm may diverge under refinement",
            1.0 - beta
        ));
    }
    if let Some(alpha) = opts.integrand_alpha {
        let hi = alpha.min(3.0 * alpha - 1.0);
        if beta >= hi {
            warnings.push(format!(
                "beta = {beta} is not below alpha ^ (3 alpha - 1) = {hi:.3}; the W2 norm of the integrand may diverge"
            ));
        }
    }

    let a = left_derivative(fv, h, beta);
    let rev: Vec<f64> = gv.iter().rev().map(|&x| x - gt).collect();
    let mut b = left_derivative(&rev, h, 1.0 - beta);
    b.reverse();

    let mut pairing = 0.0;
    for k in 1..(n - 1) {
        pairing += 0.5 * h * (a[k] * b[k] + a[k + 1] * b[k + 1]);
    }
    // first cell: D^beta f(s) = [f0 s^-beta + m0 s^{1-beta}/(1-beta)] / Gamma(1-beta)
    let m0 = (fv[1] - fv[0]) / h;
    let (b0, db) = (b[0], (b[1] - b[0]) / h);
    let p = |e: f64| h.powf(e + 1.0) / (e + 1.0);
    let c1 = 1.0 / (1.0 - beta);
    let first = (fv[0] * (b0 * p(-beta) + db * p(1.0 - beta)) + m0 * c1 * (b0 * p(1.0 - beta) + db * p(2.0 - beta)))
        / gamma(1.0 - beta);
    // last cell: with v = T - s, D^{1-beta} g_{T-} = mhat v^beta / Gamma(1 + beta)
    let mhat = (gv[n - 1] - gt) / h;
    let (an, da) = (a[n], (a[n - 1] - a[n]) / h);
    let last = mhat / gamma(1.0 + beta) * (an * p(beta) + da * p(1.0 + beta));
    pairing += first + last;

    let sup_b = b.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let norm = besov_w2_norm(f, beta)?;
    Ok(GlsResult { value: -pairing, bound: sup_b * norm.value, beta, grid_n: n + 1, warnings })
}

/// When to stop: at a fixed time or at the first grid time a level is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopKind {
    Deterministic(f64),
    /// First time the observed path is at or above the level.
    HitFromBelow(f64),
    /// First time the observed path is at or below the level.
    HitFromAbove(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub kind: StopKind,
    pub cap: f64,
}

impl StopRule {
    pub fn deterministic(t: f64, cap: f64) -> Self {
        Self { kind: StopKind::Deterministic(t), cap }
    }

    pub fn first_hit_up(level: f64, cap: f64) -> Self {
        Self { kind: StopKind::HitFromBelow(level), cap }
    }

    pub fn first_hit_down(level: f64, cap: f64) -> Self {
        Self { kind: StopKind::HitFromAbove(level), cap }
    }

    /// Index and time of the stop on the observed path's grid.
    pub fn resolve(&self, observed: &SampledPath) -> Result<(usize, f64)> {
        let times = observed.times();
        let cap = self.cap.min(observed.grid().horizon());
        if !(cap >= times[0]) {
            return Err(Error::InvalidParameter(format!("stop cap {} precedes the grid", self.cap)));
        }
        let last = observed.grid().count_until(cap * (1.0 + 1e-12)) - 1;
        let hit = match self.kind {
            StopKind::Deterministic(t) => times[..=last].iter().position(|&u| u >= t * (1.0 - 1e-12)),
            StopKind::HitFromBelow(b) => observed.values()[..=last].iter().position(|&x| x >= b),
            StopKind::HitFromAbove(b) => observed.values()[..=last].iter().position(|&x| x <= b),
        };
        let i = hit.unwrap_or(last);
        Ok((i, times[i]))
    }
}

/// `f(u) 1_{u <= tau}` with `tau` resolved on `observed`; returns the path and `tau`.
pub fn truncate_at(f: &SampledPath, rule: &StopRule, observed: &SampledPath) -> Result<(SampledPath, f64)> {
    f.check_same_grid(observed)?;
    let (i, tau) = rule.resolve(observed)?;
    let values: Vec<f64> = f.values().iter().enumerate().map(|(k, &x)| if k <= i { x } else { 0.0 }).collect();
    Ok((SampledPath::new(f.grid().clone(), values, f.seed(), f.label())?, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, n).unwrap()
    }

    #[test]
    fn constant_integrand_telescopes() {
        let g = grid(256);
        let x = SampledPath::from_fn(&g, "x", |t| (5.0 * t).sin() + t);
        let c = SampledPath::constant(&g, 2.0);
        let v = rs_forward_sum(&c, &x, &Partition::dyadic(1.0, 8).unwrap()).unwrap();
        assert!((v - 2.0 * (x.last() - x.first())).abs() < 1e-13);
    }

    #[test]
    fn identity_against_identity() {
        let g = grid(1 << 12);
        let s = SampledPath::from_fn(&g, "s", |t| t);
        let v = rs_forward_sum(&s, &s, &Partition::dyadic(1.0, 12).unwrap()).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
    }

    #[test]
    fn partition_must_lie_on_grid() {
        let g = grid(8);
        let s = SampledPath::from_fn(&g, "s", |t| t);
        let p = Partition::new(vec![0.0, 0.3, 1.0]).unwrap();
        assert!(matches!(rs_forward_sum(&s, &s, &p), Err(Error::PartitionNotOnGrid(_))));
        assert!(rs_forward_sum(&s, &s, &Partition::dyadic(1.0, 4).unwrap()).is_err());
    }

    #[test]
    fn sequences_need_decreasing_mesh() {
        let a = Partition::dyadic(1.0, 3).unwrap();
        let b = Partition::dyadic(1.0, 2).unwrap();
        assert!(PartitionSequence::new(vec![a.clone(), b.clone()], true).is_err());
        assert!(PartitionSequence::new(vec![b, a], true).is_ok());
        let odd = Partition::new(vec![0.0, 0.3, 0.6, 1.0]).unwrap();
        assert!(PartitionSequence::new(vec![Partition::dyadic(1.0, 1).unwrap(), odd], true).is_err());
    }

    #[test]
    fn zero_integrand_and_smooth_integrals() {
        let g = grid(1 << 10);
        let seq = PartitionSequence::dyadic(1.0, 4..=10).unwrap();
        let s = SampledPath::from_fn(&g, "s", |t| t);
        let zero = SampledPath::constant(&g, 0.0);
        assert!(follmer_limit(&zero, &s, &seq).unwrap().values.iter().all(|&v| v == 0.0));
        let cos = SampledPath::from_fn(&g, "cos", f64::cos);
        let r = follmer_limit(&cos, &s, &seq).unwrap();
        assert!((r.final_value - 1f64.sin()).abs() < 1e-3);
        assert_eq!(r.values.len(), 7);
        let rate = r.rate.unwrap();
        assert!((rate - 1.0).abs() < 0.05, "{rate}");
    }

    #[test]
    fn bracket_is_step_extended() {
        let g = grid(8);
        let x = SampledPath::from_fn(&g, "x", |t| t * 8.0);
        let seq = PartitionSequence::dyadic(1.0, 1..=2).unwrap();
        let (b, rec) = quadratic_variation(&x, &seq).unwrap();
        assert_eq!(rec.values, vec![32.0, 16.0]);
        assert_eq!(b.values(), &[0.0, 0.0, 4.0, 4.0, 8.0, 8.0, 12.0, 12.0, 16.0]);
    }

    #[test]
    fn gls_of_constant_integrand() {
        let g = grid(1 << 12);
        let x = SampledPath::from_fn(&g, "x", |t| (7.0 * t).sin() + t * t);
        let one = SampledPath::constant(&g, 1.0);
        let r = gls_integral(&one, &x, 0.4).unwrap();
        assert!((r.value - (x.last() - x.first())).abs() < 1e-3, "{r:?}");
        assert!(r.within_bound());
    }

    #[test]
    fn gls_matches_smooth_integral() {
        let g = grid(1 << 10);
        let f = SampledPath::from_fn(&g, "f", |t| t);
        let x = SampledPath::from_fn(&g, "x", |t| t * t);
        for beta in [0.3, 0.5, 0.7] {
            let r = gls_integral(&f, &x, beta).unwrap();
            assert!((r.value - 2.0 / 3.0).abs() < 1e-3, "beta={beta}: {r:?}");
            assert!(r.warnings.is_empty());
        }
    }

    #[test]
    fn holder_estimates() {
        let g = grid(1 << 10);
        let smooth = SampledPath::from_fn(&g, "s", |t| (3.0 * t).sin());
        assert!((holder_exponent_estimate(&smooth) - 1.0).abs() < 0.01);
        assert!(default_beta(0.5, 0.5).is_err());
        let b = default_beta(0.75, 0.75).unwrap();
        assert!((b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stopping_rules() {
        let g = grid(10);
        let x = SampledPath::from_fn(&g, "x", |t| t);
        let f = SampledPath::constant(&g, 1.0);
        let (same, tau) = truncate_at(&f, &StopRule::deterministic(1.0, 1.0), &x).unwrap();
        assert_eq!(same.values(), f.values());
        assert_eq!(tau, 1.0);
        let (never, tau) = truncate_at(&f, &StopRule::first_hit_up(5.0, 1.0), &x).unwrap();
        assert_eq!(never.values(), f.values());
        assert_eq!(tau, 1.0);
        let (cut, tau) = truncate_at(&f, &StopRule::first_hit_up(0.45, 1.0), &x).unwrap();
        assert!((tau - 0.5).abs() < 1e-15);
        assert_eq!(cut.values().iter().filter(|&&v| v == 1.0).count(), 6);
        let (_, tau) = StopRule::first_hit_down(-1.0, 0.3).resolve(&x).unwrap();
        assert!((tau - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stopped_sums_use_points_up_to_tau() {
        let g = grid(8);
        let s = SampledPath::from_fn(&g, "s", |t| t);
        let one = SampledPath::constant(&g, 1.0);
        let p = Partition::from_grid(&g);
        assert!((rs_forward_sum_until(&one, &s, &p, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }
}
