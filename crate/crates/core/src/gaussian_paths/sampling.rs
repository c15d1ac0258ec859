//! Exact Gaussian sampling on a grid.
//!
//! Every replica draws one standard normal per grid point from its own ChaCha
//! stream `(seed, replica)`. The noise is then mapped through a lower-triangular
//! factor of the covariance: Durbin-Levinson for Toeplitz structure (uniform
//! grids), independent increments for martingales, dense Cholesky otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::model::{BracketFn, CovarianceModel, ModelKind, StationaryKernel};
use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::path::{BracketPath, SampledPath, TimeGrid};

const JITTERS: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];
const BATCH: usize = 32;

/// Which factorization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMethod {
    /// Structured factor when the grid allows it, dense Cholesky otherwise.
    #[default]
    Auto,
    Dense,
}

/// Lower-triangular map from white noise (one normal per grid point) to values.
#[derive(Debug, Clone)]
pub(crate) enum Factor {
    /// Values are running sums of `sd[i] * z[i]`.
    Increments { sd: Vec<f64> },
    /// Stationary increments with autocovariance `gamma`; `x[0] = 0`, noise `z[0]` unused.
    ToeplitzIncrements { gamma: Vec<f64> },
    /// Stationary values with autocovariance `gamma`.
    ToeplitzValues { gamma: Vec<f64> },
    /// Dense Cholesky factor on the rows with positive variance; other rows are 0.
    Dense { l: Vec<f64>, active: Vec<usize>, n: usize },
}

fn fgn_autocovariance(hurst: f64, h: f64, n: usize, scale: f64) -> Vec<f64> {
    let two_h = 2.0 * hurst;
    let c = 0.5 * scale * h.powf(two_h);
    (0..n)
        .map(|k| {
            let k = k as f64;
            c * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
        })
        .collect()
}

fn bracket_sd(bracket: &BracketFn, grid: &TimeGrid, scale: f64) -> Vec<f64> {
    let t = grid.times();
    let mut sd = Vec::with_capacity(t.len());
    sd.push((scale * bracket.value(t[0])).max(0.0).sqrt());
    for w in t.windows(2) {
        sd.push((scale * (bracket.value(w[1]) - bracket.value(w[0]))).max(0.0).sqrt());
    }
    sd
}

/// Dense covariance matrix of the model on the grid (row-major).
pub fn covariance_matrix(model: &CovarianceModel, grid: &TimeGrid) -> Result<Vec<f64>> {
    let t = grid.times();
    let n = t.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let r = model.covariance(t[j], t[i])?;
            c[i * n + j] = r;
            c[j * n + i] = r;
        }
    }
    Ok(c)
}

/// In-place lower Cholesky of an `n x n` row-major matrix.
/// Returns `false` if a pivot is not positive.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let row_j = j * n;
        let d = a[row_j + j] - dot(&a[row_j..row_j + j], &a[row_j..row_j + j]);
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[row_j + j] = d;
        for i in (j + 1)..n {
            let row_i = i * n;
            let s = dot(&a[row_i..row_i + j], &a[row_j..row_j + j]);
            a[row_i + j] = (a[row_i + j] - s) / d;
        }
        for k in (j + 1)..n {
            a[row_j + k] = 0.0;
        }
    }
    true
}

/// Lower Cholesky factor with the diagonal-inflation ladder `1 + 1e-12 .. 1 + 1e-8`.
/// Returns the factor and the jitter that was needed.
pub fn cholesky_with_jitter(cov: &[f64], n: usize, model: &str) -> Result<(Vec<f64>, f64)> {
    for &jitter in &JITTERS {
        let mut a = cov.to_vec();
        for i in 0..n {
            a[i * n + i] *= 1.0 + jitter;
        }
        if cholesky_in_place(&mut a, n) {
            return Ok((a, jitter));
        }
    }
    Err(Error::Factorization { model: model.to_string(), size: n, jitter: JITTERS[JITTERS.len() - 1] })
}

impl Factor {
    pub(crate) fn build(model: &CovarianceModel, grid: &TimeGrid, method: SamplingMethod) -> Result<Self> {
        model.check_time(grid.horizon())?;
        let scale = model.variance_scale;
        if method == SamplingMethod::Auto {
            match &model.kind {
                ModelKind::GaussianMartingale { bracket } => {
                    return Ok(Self::Increments { sd: bracket_sd(bracket, grid, scale) });
                }
                ModelKind::Fbm { hurst } if *hurst == 0.5 => {
                    return Ok(Self::Increments { sd: bracket_sd(&BracketFn::Linear { rate: 1.0 }, grid, scale) });
                }
                ModelKind::Fbm { hurst } if grid.is_uniform_from_zero() => {
                    let h = grid.uniform_step().unwrap_or_default();
                    return Ok(Self::ToeplitzIncrements { gamma: fgn_autocovariance(*hurst, h, grid.cells(), scale) });
                }
                ModelKind::Stationary { kernel }
                    if grid.uniform_step().is_some() && *kernel != StationaryKernel::Constant =>
                {
                    let h = grid.uniform_step().unwrap_or_default();
                    return Ok(Self::ToeplitzValues {
                        gamma: (0..grid.len()).map(|k| scale * kernel.r(k as f64 * h)).collect(),
                    });
                }
                ModelKind::Mixed(_) => {
                    return Err(Error::InvalidParameter("use sample_mixed for mixed models".into()));
                }
                _ => {}
            }
        }
        if matches!(model.kind, ModelKind::Mixed(_)) {
            return Err(Error::InvalidParameter("use sample_mixed for mixed models".into()));
        }
        let t = grid.times();
        let active: Vec<usize> =
            (0..t.len()).filter(|&i| model.raw(t[i], t[i]).map(|v| v.2 > 0.0).unwrap_or(false)).collect();
        let sub = TimeGrid::new(active.iter().map(|&i| t[i]).collect());
        let n = active.len();
        let l = match (n, sub) {
            (0, _) => Vec::new(),
            (1, _) => vec![model.raw(t[active[0]], t[active[0]])?.2.sqrt()],
            (_, Ok(sub)) => cholesky_with_jitter(&covariance_matrix(model, &sub)?, n, &model.label)?.0,
            (_, Err(e)) => return Err(e),
        };
        Ok(Self::Dense { l, active, n })
    }

    /// Maps each noise vector (length = grid size) to path values.
    pub(crate) fn apply(&self, noises: &[Vec<f64>], label: &str) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::Increments { sd } => Ok(noises
                .iter()
                .map(|z| {
                    let mut acc = 0.0;
                    sd.iter()
                        .zip(z)
                        .map(|(s, z)| {
                            acc += s * z;
                            acc
                        })
                        .collect()
                })
                .collect()),
            Self::ToeplitzIncrements { gamma } => {
                let incs: Vec<Vec<f64>> = noises.iter().map(|z| z[1..].to_vec()).collect();
                let out = levinson_batched(gamma, &incs, label)?;
                Ok(out
                    .into_iter()
                    .map(|d| {
                        let mut v = Vec::with_capacity(d.len() + 1);
                        v.push(0.0);
                        let mut acc = 0.0;
                        for x in d {
                            acc += x;
                            v.push(acc);
                        }
                        v
                    })
                    .collect())
            }
            Self::ToeplitzValues { gamma } => levinson_batched(gamma, noises, label),
            Self::Dense { l, active, n } => Ok(noises
                .par_iter()
                .map(|z| {
                    let mut v = vec![0.0; z.len()];
                    let za: Vec<f64> = active.iter().map(|&i| z[i]).collect();
                    for (k, &i) in active.iter().enumerate() {
                        v[i] = dot(&l[k * n..k * n + k + 1], &za[..k + 1]);
                    }
                    v
                })
                .collect()),
        }
    }
}

fn levinson_batched(gamma: &[f64], noises: &[Vec<f64>], label: &str) -> Result<Vec<Vec<f64>>> {
    let chunks: Vec<Result<Vec<Vec<f64>>>> = noises
        .par_chunks(BATCH)
        .map(|chunk| {
            for &jitter in &JITTERS {
                if let Some(out) = levinson(gamma, chunk, jitter) {
                    return Ok(out);
                }
            }
            Err(Error::Factorization {
                model: label.to_string(),
                size: gamma.len(),
                jitter: JITTERS[JITTERS.len() - 1],
            })
        })
        .collect();
    let mut out = Vec::with_capacity(noises.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Durbin-Levinson recursion for a stationary sequence with autocovariance
/// `gamma`, applied to a batch of noise vectors. Equivalent to multiplying by
/// the Cholesky factor of the Toeplitz matrix. `None` if the matrix is not
/// positive definite after inflating the diagonal by `1 + jitter`.
fn levinson(gamma: &[f64], noises: &[Vec<f64>], jitter: f64) -> Option<Vec<Vec<f64>>> {
    let n = gamma.len();
    let g0 = gamma[0] * (1.0 + jitter);
    if !(g0 > 0.0) {
        return None;
    }
    let mut out: Vec<Vec<f64>> = noises.iter().map(|_| vec![0.0; n]).collect();
    // phi[j - 1] = phi_{k, j}; rev[i] = phi_{k, k - i}.
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut rev: Vec<f64> = Vec::with_capacity(n);
    let mut v = g0;
    for (x, z) in out.iter_mut().zip(noises) {
        x[0] = v.sqrt() * z[0];
    }
    for k in 1..n {
        let mut num = gamma[k];
        for j in 1..k {
            num -= phi[j - 1] * gamma[k - j];
        }
        let kappa = num / v;
        let old = phi.clone();
        for j in 1..k {
            phi[j - 1] = old[j - 1] - kappa * old[k - j - 1];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        if !(v > 0.0) {
            return None;
        }
        rev.clear();
        rev.extend(phi.iter().rev());
        let sd = v.sqrt();
        for (x, z) in out.iter_mut().zip(noises) {
            x[k] = dot(&rev, &x[..k]) + sd * z[k];
        }
    }
    Some(out)
}

pub(crate) fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn noise(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = replica_rng(seed, stream);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Exact draws of the model on the grid; replica `i` uses stream `i` of `seed`.
pub fn sample_paths(model: &CovarianceModel, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<Vec<SampledPath>> {
    sample_paths_with(model, grid, n_paths, seed, SamplingMethod::Auto)
}

pub fn sample_paths_with(
    model: &CovarianceModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<Vec<SampledPath>> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
    }
    model.validate()?;
    let factor = Factor::build(model, grid, method)?;
    let noises: Vec<Vec<f64>> = (0..n_paths as u64).into_par_iter().map(|i| noise(seed, i << 2, grid.len())).collect();
    let values = factor.apply(&noises, &model.label)?;
    values.into_iter().map(|v| SampledPath::new(grid.clone(), v, seed, model.label.clone())).collect()
}

/// One draw of `Y = M + X` with its components and the bracket of `M`.
///
/// `y[i]` is the floating-point sum `m[i] + x[i]` at every grid point.
#[derive(Debug, Clone)]
pub struct MixedEnsemble {
    pub y: SampledPath,
    pub m: SampledPath,
    pub x: SampledPath,
    pub bracket: BracketPath,
}

pub fn sample_mixed(model: &CovarianceModel, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<Vec<MixedEnsemble>> {
    model.validate()?;
    let ModelKind::Mixed(spec) = &model.kind else {
        return Err(Error::InvalidParameter(format!("`{}` is not a mixed model", model.label)));
    };
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
    }
    if spec.martingale.is_zero() {
        return Err(Error::Precondition("martingale part has zero bracket and cannot serve as a clock".into()));
    }
    if !spec.martingale.is_lipschitz() {
        return Err(Error::Precondition("martingale bracket is not Lipschitz on [0, T]".into()));
    }
    if let Some(h) = &spec.holder {
        match h.class_index() {
            Some(a) if a > 0.5 => {}
            other => {
                return Err(Error::Precondition(format!(
                    "Hölder part `{}` has class index {:?}; need alpha > 1/2",
                    h.label, other
                )))
            }
        }
    }
    model.check_time(grid.horizon())?;
    let scale = model.variance_scale;
    let m_factor = Factor::Increments { sd: bracket_sd(&spec.martingale, grid, scale) };
    let zm: Vec<Vec<f64>> = (0..n_paths as u64).into_par_iter().map(|i| noise(seed, i << 2, grid.len())).collect();
    let m_vals = m_factor.apply(&zm, &model.label)?;
    let x_vals = match &spec.holder {
        None => vec![vec![0.0; grid.len()]; n_paths],
        Some(h) => {
            let h = h.as_ref().clone().scaled(scale)?;
            let factor = Factor::build(&h, grid, SamplingMethod::Auto)?;
            let zx: Vec<Vec<f64>> = (0..n_paths as u64)
                .into_par_iter()
                .map(|i| {
                    let z2 = noise(seed, (i << 2) | 1, grid.len());
                    match spec.coupling {
                        None => z2,
                        Some(rho) => {
                            let c = (1.0 - rho * rho).sqrt();
                            zm[i as usize].iter().zip(&z2).map(|(a, b)| rho * a + c * b).collect()
                        }
                    }
                })
                .collect();
            factor.apply(&zx, &h.label)?
        }
    };
    let bracket = BracketPath::from_fn(grid, |t| scale * spec.martingale.value(t))?;
    m_vals
        .into_iter()
        .zip(x_vals)
        .map(|(m, x)| {
            let y: Vec<f64> = m.iter().zip(&x).map(|(a, b)| a + b).collect();
            Ok(MixedEnsemble {
                y: SampledPath::new(grid.clone(), y, seed, model.label.clone())?,
                m: SampledPath::new(grid.clone(), m, seed, format!("{}:M", model.label))?,
                x: SampledPath::new(grid.clone(), x, seed, format!("{}:X", model.label))?,
                bracket: bracket.clone(),
            })
        })
        .collect()
}
