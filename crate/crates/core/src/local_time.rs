//! Local times with respect to a quadratic-variation clock,
//! `L_t^a = lim (1/2eps) int_0^t 1{a - eps < Y_u < a + eps} d<Y>_u`,
//! the occupation time formula, and Berman's integrability criterion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_paths::CovarianceModel;
use crate::numeric::gauss_legendre;
use crate::path::{BracketPath, SampledPath};

/// How the window indicator is evaluated on a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowRule {
    /// Fraction of the cell the linear interpolant spends in the window,
    /// with the clock increment spread evenly over the cell.
    #[default]
    Interpolated,
    /// Indicator at the left endpoint times the clock increment.
    LeftPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldOptions {
    pub rule: WindowRule,
    /// Keep every `time_stride`-th grid time; the terminal time is always kept.
    pub time_stride: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { rule: WindowRule::Interpolated, time_stride: 1 }
    }
}

pub const DEFAULT_LEVELS: usize = 81;

/// `2 * sqrt(h / T) * std(dY)`.
pub fn default_epsilon(y: &SampledPath) -> f64 {
    let g = y.grid();
    let h = (g.horizon() - g.start()) / g.cells() as f64;
    2.0 * (h / (g.horizon() - g.start())).sqrt() * increment_std(y)
}

fn increment_std(y: &SampledPath) -> f64 {
    let d: Vec<f64> = y.values().windows(2).map(|w| w[1] - w[0]).collect();
    if d.len() < 2 {
        return d.first().map_or(0.0, |x| x.abs());
    }
    crate::numeric::variance(&d).sqrt()
}

fn increment_rms(y: &SampledPath) -> f64 {
    let v = y.values();
    (v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// `n` equally spaced levels over the path range padded by `3 eps`.
pub fn default_levels(y: &SampledPath, epsilon: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (y.min() - 3.0 * epsilon, y.max() + 3.0 * epsilon);
    if n < 2 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Share of the cell `[y0 -> y1]` spent in `(a - eps, a + eps)`.
fn window_share(rule: WindowRule, y0: f64, y1: f64, a: f64, eps: f64) -> f64 {
    match rule {
        WindowRule::LeftPoint => {
            if (y0 - a).abs() < eps {
                1.0
            } else {
                0.0
            }
        }
        WindowRule::Interpolated => {
            let d = y1 - y0;
            if d == 0.0 {
                return if (y0 - a).abs() < eps { 1.0 } else { 0.0 };
            }
            let u0 = (a - eps - y0) / d;
            let u1 = (a + eps - y0) / d;
            let (lo, hi) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
            (hi.min(1.0) - lo.max(0.0)).max(0.0)
        }
    }
}

/// Level range `[lo, hi)` of a sorted level list touched by a cell.
fn touched(levels: &[f64], rule: WindowRule, y0: f64, y1: f64, eps: f64) -> (usize, usize) {
    let (a, b) = match rule {
        WindowRule::LeftPoint => (y0, y0),
        WindowRule::Interpolated => (y0.min(y1), y0.max(y1)),
    };
    let lo = levels.partition_point(|&l| l <= a - eps);
    let hi = levels.partition_point(|&l| l < b + eps);
    (lo, hi.max(lo))
}

fn check_inputs(y: &SampledPath, clock: &BracketPath, epsilon: f64) -> Result<()> {
    if !y.grid().same_as(clock.grid()) {
        return Err(Error::GridMismatch);
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Estimated `L_t^a` on a level grid and a subset of the path's times.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    levels: Vec<f64>,
    time_indices: Vec<usize>,
    times: Vec<f64>,
    /// Row-major: one row of levels per kept time.
    values: Vec<f64>,
    epsilon: f64,
    rule: WindowRule,
    clock: BracketPath,
    warnings: Vec<String>,
}

impl LocalTimeField {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Grid indices of the kept times.
    pub fn time_indices(&self) -> &[usize] {
        &self.time_indices
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rule(&self) -> WindowRule {
        self.rule
    }

    pub fn clock(&self) -> &BracketPath {
        &self.clock
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Row of `L_{t_i}^a` over the levels.
    pub fn row(&self, time_index: usize) -> &[f64] {
        let m = self.levels.len();
        &self.values[time_index * m..(time_index + 1) * m]
    }

    pub fn terminal(&self) -> &[f64] {
        self.row(self.times.len() - 1)
    }

    pub fn value(&self, time_index: usize, level_index: usize) -> f64 {
        self.row(time_index)[level_index]
    }

    /// `L_{t_i}^a` by linear interpolation in `a`; zero outside the level grid.
    pub fn at(&self, time_index: usize, a: f64) -> f64 {
        interpolate_levels(&self.levels, self.row(time_index), a)
    }

    pub fn terminal_at(&self, a: f64) -> f64 {
        self.at(self.times.len() - 1, a)
    }
}

fn interpolate_levels(levels: &[f64], row: &[f64], a: f64) -> f64 {
    let m = levels.len();
    if m == 1 {
        return if a == levels[0] { row[0] } else { 0.0 };
    }
    if a < levels[0] || a > levels[m - 1] {
        return 0.0;
    }
    let j = levels.partition_point(|&l| l <= a).clamp(1, m - 1);
    let w = (a - levels[j - 1]) / (levels[j] - levels[j - 1]);
    (1.0 - w) * row[j - 1] + w * row[j]
}

pub fn estimate_local_time(
    y: &SampledPath,
    clock: &BracketPath,
    levels: &[f64],
    epsilon: f64,
) -> Result<LocalTimeField> {
    estimate_local_time_with(y, clock, levels, epsilon, &FieldOptions::default())
}

pub fn estimate_local_time_with(
    y: &SampledPath,
    clock: &BracketPath,
    levels: &[f64],
    epsilon: f64,
    opts: &FieldOptions,
) -> Result<LocalTimeField> {
    check_inputs(y, clock, epsilon)?;
    if levels.is_empty() || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("levels must be strictly increasing and nonempty".into()));
    }
    if opts.time_stride == 0 {
        return Err(Error::InvalidParameter("time stride must be positive".into()));
    }
    let v = y.values();
    let c = clock.values();
    let n = v.len() - 1;
    let m = levels.len();
    let mut time_indices: Vec<usize> = (0..=n).step_by(opts.time_stride).collect();
    if time_indices.last() != Some(&n) {
        time_indices.push(n);
    }
    let scale = 0.5 / epsilon;
    let mut acc = vec![0.0; m];
    let mut values = Vec::with_capacity(time_indices.len() * m);
    values.extend_from_slice(&acc);
    let mut next = 1;
    for k in 1..=n {
        let dc = c[k] - c[k - 1];
        if dc > 0.0 {
            let (y0, y1) = (v[k - 1], v[k]);
            let (lo, hi) = touched(levels, opts.rule, y0, y1, epsilon);
            for (j, a) in acc[lo..hi].iter_mut().zip(&levels[lo..hi]) {
                *j += scale * dc * window_share(opts.rule, y0, y1, *a, epsilon);
            }
        }
        if next < time_indices.len() && time_indices[next] == k {
            values.extend_from_slice(&acc);
            next += 1;
        }
    }
    let times = time_indices.iter().map(|&i| y.times()[i]).collect();
    Ok(LocalTimeField {
        levels: levels.to_vec(),
        time_indices,
        times,
        values,
        epsilon,
        rule: opts.rule,
        clock: clock.clone(),
        warnings: undersmoothing(y, epsilon, opts.rule),
    })
}

/// The interpolated rule only degrades once the window is far below the
/// increment size; the left-point rule needs windows wider than one step.
fn undersmoothing(y: &SampledPath, epsilon: f64, rule: WindowRule) -> Vec<String> {
    let rms = increment_rms(y);
    let floor = match rule {
        WindowRule::LeftPoint => rms,
        WindowRule::Interpolated => 1e-3 * rms,
    };
    if epsilon < floor {
        vec![format!("bandwidth {epsilon:e} is below the path resolution {floor:e}; the estimate is undersmoothed")]
    } else {
        Vec::new()
    }
}

/// `L_T^a` at a single level, without building a field.
pub fn local_time_at(y: &SampledPath, clock: &BracketPath, a: f64, epsilon: f64, rule: WindowRule) -> Result<f64> {
    check_inputs(y, clock, epsilon)?;
    let v = y.values();
    let c = clock.values();
    let mut s = 0.0;
    for k in 1..v.len() {
        let dc = c[k] - c[k - 1];
        if dc > 0.0 {
            s += dc * window_share(rule, v[k - 1], v[k], a, epsilon);
        }
    }
    Ok(s * 0.5 / epsilon)
}

/// Both sides of `int g(a) L_t^a da = int_0^t g(Y_u) d<Y>_u` at the field's last time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationCheck {
    /// Trapezoid over the levels.
    pub level_side: f64,
    /// Forward clock sum.
    pub clock_side: f64,
    pub residual: f64,
}

impl OccupationCheck {
    /// Residual relative to the larger side, or to the clock mass when both vanish.
    pub fn relative(&self, clock_mass: f64) -> f64 {
        let d = self.level_side.abs().max(self.clock_side.abs()).max(clock_mass);
        if d == 0.0 {
            0.0
        } else {
            self.residual / d
        }
    }
}

pub fn occupation_residual(
    y: &SampledPath,
    clock: &BracketPath,
    g: impl Fn(f64) -> f64,
    field: &LocalTimeField,
) -> Result<OccupationCheck> {
    if !y.grid().same_as(clock.grid()) || !y.grid().same_as(field.clock.grid()) {
        return Err(Error::GridMismatch);
    }
    let (lo, hi) = (y.min(), y.max());
    let levels = field.levels();
    let eps = field.epsilon();
    if levels.len() < 2 || levels[0] > lo - eps || levels[levels.len() - 1] < hi + eps {
        return Err(Error::Coverage { min: lo, max: hi });
    }
    let last = field.times.len() - 1;
    let row = field.row(last);
    let gl: Vec<f64> = levels.iter().map(|&a| g(a)).collect();
    let level_side: f64 =
        (1..levels.len()).map(|j| 0.5 * (gl[j] * row[j] + gl[j - 1] * row[j - 1]) * (levels[j] - levels[j - 1])).sum();
    let end = field.time_indices[last];
    let v = y.values();
    let c = clock.values();
    let clock_side: f64 = (1..=end).map(|k| g(v[k - 1]) * (c[k] - c[k - 1])).sum();
    Ok(OccupationCheck { level_side, clock_side, residual: (level_side - clock_side).abs() })
}

/// Grid estimate of `int_0^T int_0^T W(t,s)^{-1/2} ds dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BermanReport {
    pub value: f64,
    pub cells: usize,
    /// The integrand is infinite on a set of positive measure or the
    /// diagonal singularity is not integrable.
    pub diverged: bool,
}

/// Off-diagonal cells use a 4x4 Gauss-Legendre rule. Diagonal cells use the
/// local form `W ~ C |t-s|^{2 alpha}`, with `C` read off the cell's own
/// increment variance, which is exact for power-law models.
pub fn berman_integral(model: &CovarianceModel, n: usize) -> Result<BermanReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid needs at least one cell".into()));
    }
    let horizon = model.horizon;
    let h = horizon / n as f64;
    let diverged = BermanReport { value: f64::INFINITY, cells: n, diverged: true };
    let alpha = match model.class_index() {
        Some(a) if a < 1.0 => a,
        _ => return Ok(diverged),
    };
    let (gx, gw) = gauss_legendre(4);
    let diag_factor = 2.0 * h * h / ((1.0 - alpha) * (2.0 - alpha));
    let w = |s: f64, t: f64| model.raw(s, t).map(|r| r.1);

    if model.stationarity() != crate::gaussian_paths::Stationarity::General {
        // W depends on |t - s| only: every cell at lag d contributes the same
        let cell0 = w(0.0, h)?;
        if !(cell0 > 0.0) {
            return Ok(diverged);
        }
        let mut total = n as f64 * diag_factor / cell0.sqrt();
        for d in 1..n {
            let mut cell = 0.0;
            for (xi, wi) in gx.iter().zip(&gw) {
                for (xj, wj) in gx.iter().zip(&gw) {
                    let lag = (d as f64 + 0.5 * (xi - xj)) * h;
                    let wv = w(0.0, lag)?;
                    if !(wv > 0.0) {
                        return Ok(diverged);
                    }
                    cell += wi * wj / wv.sqrt();
                }
            }
            total += 2.0 * (n - d) as f64 * cell * 0.25 * h * h;
        }
        return Ok(BermanReport { value: total, cells: n, diverged: false });
    }

    let rows: Vec<Result<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ti = i as f64 * h;
            let cell0 = w(ti, ti + h)?;
            if !(cell0 > 0.0) {
                return Ok(None);
            }
            let mut row = diag_factor / cell0.sqrt();
            for j in 0..i {
                let sj = j as f64 * h;
                let mut cell = 0.0;
                for (xi, wi) in gx.iter().zip(&gw) {
                    let t = ti + 0.5 * (xi + 1.0) * h;
                    for (xj, wj) in gx.iter().zip(&gw) {
                        let s = sj + 0.5 * (xj + 1.0) * h;
                        let wv = w(s, t)?;
                        if !(wv > 0.0) {
                            return Ok(None);
                        }
                        cell += wi * wj / wv.sqrt();
                    }
                }
                row += 2.0 * cell * 0.25 * h * h;
            }
            Ok(Some(row))
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        match r? {
            Some(v) => total += v,
            None => return Ok(diverged),
        }
    }
    Ok(BermanReport { value: total, cells: n, diverged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::{BracketFn, StationaryKernel};
    use crate::path::TimeGrid;

    fn zigzag() -> (SampledPath, BracketPath) {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let y = SampledPath::new(g.clone(), vec![0.0, 1.0, 0.0, -1.0, 0.0], 0, "zigzag").unwrap();
        let clock = BracketPath::from_fn(&g, |t| t).unwrap();
        (y, clock)
    }

    #[test]
    fn interpolated_share_is_exact_for_linear_cells() {
        let (y, clock) = zigzag();
        // two sweeps of unit speed 4 over every level in (-1, 1)
        for a in [0.5, 0.0, -0.3] {
            let l = local_time_at(&y, &clock, a, 0.1, WindowRule::Interpolated).unwrap();
            assert!((l - 0.5).abs() < 1e-12, "{a}: {l}");
        }
        assert_eq!(local_time_at(&y, &clock, 3.0, 0.1, WindowRule::Interpolated).unwrap(), 0.0);
    }

    #[test]
    fn left_point_counts_starting_cells() {
        let (y, clock) = zigzag();
        let l = local_time_at(&y, &clock, 0.0, 0.5, WindowRule::LeftPoint).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
    }

    #[test]
    fn field_is_monotone_and_matches_scalar() {
        let (y, clock) = zigzag();
        let levels = default_levels(&y, 0.2, 21);
        let f = estimate_local_time(&y, &clock, &levels, 0.2).unwrap();
        for (j, &a) in levels.iter().enumerate() {
            for i in 1..f.times().len() {
                assert!(f.value(i, j) >= f.value(i - 1, j));
            }
            let direct = local_time_at(&y, &clock, a, 0.2, WindowRule::Interpolated).unwrap();
            assert!((f.terminal()[j] - direct).abs() < 1e-14);
        }
        let strided =
            estimate_local_time_with(&y, &clock, &levels, 0.2, &FieldOptions { time_stride: 3, ..Default::default() })
                .unwrap();
        assert_eq!(strided.time_indices(), &[0, 3, 4]);
        assert_eq!(strided.terminal(), f.terminal());
    }

    #[test]
    fn zero_clock_gives_zero_field() {
        let (y, _) = zigzag();
        let f = estimate_local_time(&y, &BracketPath::zero(y.grid()), &[-0.5, 0.0, 0.5], 0.3).unwrap();
        assert!(f.terminal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn occupation_of_constant_is_clock_mass() {
        let (y, clock) = zigzag();
        let eps = 0.05;
        let levels = default_levels(&y, eps, 401);
        let f = estimate_local_time(&y, &clock, &levels, eps).unwrap();
        let occ = occupation_residual(&y, &clock, |_| 1.0, &f).unwrap();
        assert!((occ.clock_side - 1.0).abs() < 1e-14);
        assert!(occ.residual < 1e-3, "{occ:?}");
        let narrow = estimate_local_time(&y, &clock, &[-0.5, 0.0, 0.5], eps).unwrap();
        assert!(matches!(occupation_residual(&y, &clock, |_| 1.0, &narrow), Err(Error::Coverage { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (y, clock) = zigzag();
        assert!(estimate_local_time(&y, &clock, &[0.0], 0.0).is_err());
        assert!(estimate_local_time(&y, &clock, &[1.0, 0.0], 0.1).is_err());
        let other = BracketPath::zero(&TimeGrid::uniform(1.0, 8).unwrap());
        assert_eq!(estimate_local_time(&y, &other, &[0.0], 0.1), Err(Error::GridMismatch));
    }

    fn berman_fbm(h: f64) -> f64 {
        2.0 / ((1.0 - h) * (2.0 - h))
    }

    #[test]
    fn berman_matches_closed_form() {
        for hurst in [0.3, 0.5, 0.9] {
            let m = CovarianceModel::fbm(hurst, 1.0).unwrap();
            let r = berman_integral(&m, 512).unwrap();
            assert!(!r.diverged);
            let rel = (r.value - berman_fbm(hurst)).abs() / berman_fbm(hurst);
            assert!(rel < 0.02, "H={hurst}: {} vs {}", r.value, berman_fbm(hurst));
        }
    }

    #[test]
    fn berman_general_path_agrees_with_lag_form() {
        let lin = CovarianceModel::martingale(BracketFn::Linear { rate: 1.0 }, 1.0).unwrap();
        let pw = CovarianceModel::martingale(BracketFn::Power { scale: 1.0, exponent: 1.0 }, 1.0).unwrap();
        let a = berman_integral(&lin, 64).unwrap().value;
        let b = berman_integral(&pw, 64).unwrap().value;
        assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
    }

    #[test]
    fn berman_flags_constant_process() {
        let m = CovarianceModel::stationary(StationaryKernel::Constant, 1.0).unwrap();
        assert!(berman_integral(&m, 16).unwrap().diverged);
    }
}
