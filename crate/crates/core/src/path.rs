//! Time grids, sampled paths and bracket (clock) paths.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly increasing, shared set of sample times.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.times, &other.times) || self.times[..] == other.times[..]
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if !times.iter().all(|t| t.is_finite()) || times[0] < 0.0 {
            return Err(Error::InvalidGrid("times must be finite and nonnegative".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("times not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(Self { times: times.into() })
    }

    /// `cells + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if cells == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        let n = cells as f64;
        let times = (0..=cells).map(|i| horizon * i as f64 / n).collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Common step if the grid is uniform (relative tolerance 1e-9).
    pub fn uniform_step(&self) -> Option<f64> {
        let h = (self.horizon() - self.start()) / self.cells() as f64;
        let tol = 1e-9 * h;
        self.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol).then_some(h)
    }

    pub fn is_uniform_from_zero(&self) -> bool {
        self.start() == 0.0 && self.uniform_step().is_some()
    }

    /// Index of the grid point equal to `t` up to a small tolerance.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (self.horizon() - self.start()) / self.cells() as f64;
        let i = self.times.partition_point(|&x| x < t - tol);
        (i < self.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Every `stride`-th point; the last point must be retained.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.cells().is_multiple_of(stride) {
            return Err(Error::InvalidGrid(format!("stride {stride} does not divide {} cells", self.cells())));
        }
        Self::new(self.times.iter().step_by(stride).copied().collect())
    }

    /// Points with time `<= t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    pub(crate) fn same_as(&self, other: &TimeGrid) -> bool {
        self == other
    }
}

/// One realisation on a grid. Values are never mutated after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Arc<[f64]>,
    seed: u64,
    label: String,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, seed: u64, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} grid points", values.len(), grid.len())));
        }
        Ok(Self { grid, values: values.into(), seed, label: label.into() })
    }

    pub fn from_fn(grid: &TimeGrid, label: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.times().iter().map(|&t| f(t)).collect::<Vec<_>>();
        Self { grid: grid.clone(), values: values.into(), seed: 0, label: label.into() }
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Self {
        Self::from_fn(grid, "constant", |_| c)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise image under `f`, keeping grid, seed and label.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&x| f(x)).collect::<Vec<_>>();
        Self { grid: self.grid.clone(), values: values.into(), seed: self.seed, label: self.label.clone() }
    }

    /// Pointwise combination with a path on the same grid.
    pub fn zip_with(&self, other: &SampledPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(other.values.iter()).map(|(&a, &b)| f(a, b)).collect::<Vec<_>>();
        Ok(Self { grid: self.grid.clone(), values: values.into(), seed: self.seed, label: self.label.clone() })
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        Self { label: label.into(), ..self.clone() }
    }

    /// Restriction to every `stride`-th grid point.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.subsample(stride)?;
        let values = self.values.iter().step_by(stride).copied().collect::<Vec<_>>();
        Self::new(grid, values, self.seed, self.label.clone())
    }

    /// Linear interpolation of the path at time `t` inside the grid range.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let times = self.grid.times();
        if t < times[0] || t > self.grid.horizon() {
            return Err(Error::OutOfHorizon { t, horizon: self.grid.horizon() });
        }
        let j = times.partition_point(|&x| x <= t);
        if j >= times.len() {
            return Ok(self.last());
        }
        let (t0, t1) = (times[j - 1], times[j]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[j - 1] * (1.0 - w) + self.values[j] * w)
    }

    pub(crate) fn check_same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Nondecreasing clock path `<Y>_t` with `<Y>_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketPath {
    grid: TimeGrid,
    values: Arc<[f64]>,
}

impl BracketPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} bracket values for {} grid points", values.len(), grid.len())));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter(format!("bracket must start at 0, got {}", values[0])));
        }
        if let Some(i) = values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidParameter(format!("bracket decreases after index {i}")));
        }
        Ok(Self { grid, values: values.into() })
    }

    pub fn zero(grid: &TimeGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()].into() }
    }

    /// Running sum of nonnegative increments; `increments[k]` is the mass of cell `k`.
    pub fn from_increments(grid: &TimeGrid, increments: &[f64]) -> Result<Self> {
        if increments.len() != grid.cells() {
            return Err(Error::InvalidGrid("one increment per cell expected".into()));
        }
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(0.0);
        for &d in increments {
            if !(d >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative bracket increment {d}")));
            }
            acc += d;
            values.push(acc);
        }
        Ok(Self { grid: grid.clone(), values: values.into() })
    }

    /// `b(t) - b(t_0)` for a deterministic bracket function.
    pub fn from_fn(grid: &TimeGrid, b: impl Fn(f64) -> f64) -> Result<Self> {
        let b0 = b(grid.start());
        Self::new(grid.clone(), grid.times().iter().map(|&t| b(t) - b0).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.terminal() == 0.0
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.subsample(stride)?;
        Self::new(grid, self.values.iter().step_by(stride).copied().collect())
    }

    pub fn as_path(&self, label: &str) -> SampledPath {
        SampledPath { grid: self.grid.clone(), values: self.values.clone(), seed: 0, label: label.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_is_exact_on_dyadics() {
        let g = TimeGrid::uniform(1.0, 1024).unwrap();
        assert_eq!(g.len(), 1025);
        assert_eq!(g.times()[512], 0.5);
        assert_eq!(g.horizon(), 1.0);
        assert!(g.is_uniform_from_zero());
        assert_eq!(g.index_of(0.25), Some(256));
        assert_eq!(g.index_of(0.2500001), None);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![-1.0, 0.5]).is_err());
        assert!(TimeGrid::uniform(0.0, 4).is_err());
    }

    #[test]
    fn path_length_must_match() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(SampledPath::new(g.clone(), vec![0.0; 4], 1, "x").is_err());
        assert!(SampledPath::new(g, vec![0.0; 5], 1, "x").is_ok());
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let g = TimeGrid::uniform(2.0, 8).unwrap();
        let p = SampledPath::from_fn(&g, "t", |t| t * t);
        let q = p.subsample(4).unwrap();
        assert_eq!(q.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(q.values(), &[0.0, 1.0, 4.0]);
        assert!(p.subsample(3).is_err());
    }

    #[test]
    fn bracket_must_be_monotone_from_zero() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        assert!(BracketPath::new(g.clone(), vec![0.0, 0.4, 0.3]).is_err());
        assert!(BracketPath::new(g.clone(), vec![0.1, 0.4, 0.5]).is_err());
        let b = BracketPath::from_increments(&g, &[0.25, 0.5]).unwrap();
        assert_eq!(b.values(), &[0.0, 0.25, 0.75]);
        assert!(BracketPath::zero(&g).is_zero());
    }

    #[test]
    fn interpolation_is_linear() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let p = SampledPath::from_fn(&g, "t", |t| 2.0 * t);
        assert!((p.interpolate(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(p.interpolate(1.0).unwrap(), 2.0);
        assert!(p.interpolate(1.5).is_err());
    }
}
