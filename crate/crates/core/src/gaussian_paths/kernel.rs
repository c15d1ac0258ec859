use super::model::{CovarianceModel, ModelKind, Stationarity};
use crate::error::{Error, Result};

/// Covariance `R(s,t)`, incremental variance `W(s,t)` and the two variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValues {
    pub r: f64,
    pub w: f64,
    pub vs: f64,
    pub vt: f64,
}

pub fn eval_kernel(model: &CovarianceModel, s: f64, t: f64) -> Result<KernelValues> {
    model.check_time(s)?;
    model.check_time(t)?;
    let (r, w, vs, vt) = model.raw(s, t)?;
    Ok(KernelValues { r, w, vs, vt })
}

/// `w*(t) = sup_{0 <= s <= T-t} W(t+s, s)`.
///
/// Closed form for stationary and stationary-increment models, otherwise the
/// maximum over `resolution + 1` equally spaced values of `s`.
pub fn worst_case_increment(model: &CovarianceModel, t: f64, resolution: usize) -> Result<f64> {
    model.check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let t = t.min(model.horizon);
    if model.stationarity() != Stationarity::General {
        return Ok(model.raw(0.0, t)?.1);
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    if let ModelKind::Mixed(spec) = &model.kind {
        if spec.coupling.is_some() {
            return Err(Error::GridDependentKernel(model.label.clone()));
        }
    }
    let span = model.horizon - t;
    let mut best: f64 = 0.0;
    for i in 0..=resolution {
        let s = span * i as f64 / resolution as f64;
        best = best.max(model.raw(s, s + t)?.1);
    }
    Ok(best)
}
