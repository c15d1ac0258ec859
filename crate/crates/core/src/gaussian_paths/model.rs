use crate::error::{Error, Result};

/// Correlation function `r(u)` of a stationary process, normalised to `r(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum StationaryKernel {
    /// `r(u) = exp(-rate * u)` (Ornstein-Uhlenbeck).
    Exponential { rate: f64 },
    /// `r(u) = exp(-(rate * u)^power)` with `power` in `(0, 2]`.
    PowerExponential { rate: f64, power: f64 },
    /// `r(u) = 1`: a single random level, no increments at all.
    Constant,
}

impl StationaryKernel {
    pub fn r(&self, u: f64) -> f64 {
        let u = u.abs();
        match *self {
            Self::Exponential { rate } => (-rate * u).exp(),
            Self::PowerExponential { rate, power } => (-(rate * u).powf(power)).exp(),
            Self::Constant => 1.0,
        }
    }

    /// `1 - r(u)` without cancellation for small `u`.
    pub fn one_minus_r(&self, u: f64) -> f64 {
        let u = u.abs();
        match *self {
            Self::Exponential { rate } => -(-rate * u).exp_m1(),
            Self::PowerExponential { rate, power } => -(-(rate * u).powf(power)).exp_m1(),
            Self::Constant => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } if !(rate > 0.0) => {
                Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")))
            }
            Self::PowerExponential { rate, power } if !(rate > 0.0) || !(power > 0.0 && power <= 2.0) => {
                Err(Error::InvalidParameter(format!(
                    "power-exponential kernel needs rate > 0 and power in (0, 2], got {rate}, {power}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn local_exponent(&self) -> Option<f64> {
        match *self {
            Self::Exponential { .. } => Some(1.0),
            Self::PowerExponential { power, .. } => Some(power),
            Self::Constant => None,
        }
    }
}

/// Deterministic bracket `<M>_t` of a Gaussian martingale.
#[derive(Debug, Clone, PartialEq)]
pub enum BracketFn {
    /// `rate * t`.
    Linear { rate: f64 },
    /// `scale * t^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl BracketFn {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Linear { rate } => rate * t,
            Self::Power { scale, exponent } => scale * t.powf(exponent),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Linear { rate } => rate == 0.0,
            Self::Power { scale, .. } => scale == 0.0,
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        match *self {
            Self::Linear { .. } => true,
            Self::Power { exponent, .. } => exponent >= 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Linear { rate } if !(rate >= 0.0) => {
                Err(Error::InvalidParameter(format!("bracket rate must be >= 0, got {rate}")))
            }
            Self::Power { scale, exponent } if !(scale >= 0.0) || !(exponent > 0.0) => Err(Error::InvalidParameter(
                format!("power bracket needs scale >= 0 and exponent > 0, got {scale}, {exponent}"),
            )),
            _ => Ok(()),
        }
    }
}

/// `Y = M + X` with a Gaussian martingale `M` and a Hölder part `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpec {
    pub martingale: BracketFn,
    /// `None` means `X = 0`.
    pub holder: Option<Box<CovarianceModel>>,
    /// Correlation `rho` in `[-0.5, 0.5]` between the noise driving `M` and `X`;
    /// `None` keeps them independent.
    pub coupling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Fbm { hurst: f64 },
    Stationary { kernel: StationaryKernel },
    GaussianMartingale { bracket: BracketFn },
    Mixed(MixedSpec),
}

/// How increments of the model behave in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stationarity {
    Stationary,
    StationaryIncrements,
    General,
}

/// Centred Gaussian process on `[0, horizon]` with covariance `variance_scale * R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub kind: ModelKind,
    pub horizon: f64,
    pub label: String,
    pub variance_scale: f64,
}

impl CovarianceModel {
    fn build(kind: ModelKind, horizon: f64, label: String) -> Result<Self> {
        let m = Self { kind, horizon, label, variance_scale: 1.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn fbm(hurst: f64, horizon: f64) -> Result<Self> {
        Self::build(ModelKind::Fbm { hurst }, horizon, format!("fbm(H={hurst})"))
    }

    pub fn brownian(horizon: f64) -> Result<Self> {
        Self::build(ModelKind::Fbm { hurst: 0.5 }, horizon, "bm".into())
    }

    pub fn stationary(kernel: StationaryKernel, horizon: f64) -> Result<Self> {
        let label = match &kernel {
            StationaryKernel::Exponential { rate } => format!("ou(rate={rate})"),
            StationaryKernel::PowerExponential { rate, power } => format!("powexp(rate={rate},power={power})"),
            StationaryKernel::Constant => "constant".into(),
        };
        Self::build(ModelKind::Stationary { kernel }, horizon, label)
    }

    pub fn martingale(bracket: BracketFn, horizon: f64) -> Result<Self> {
        let label = match &bracket {
            BracketFn::Linear { rate } => format!("martingale(rate={rate})"),
            BracketFn::Power { scale, exponent } => format!("martingale({scale}*t^{exponent})"),
        };
        Self::build(ModelKind::GaussianMartingale { bracket }, horizon, label)
    }

    pub fn mixed(
        martingale: BracketFn,
        holder: Option<CovarianceModel>,
        coupling: Option<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let label = format!(
            "mixed(m={:?},x={},rho={})",
            martingale,
            holder.as_ref().map_or("0", |h| h.label.as_str()),
            coupling.map_or("indep".to_string(), |r| r.to_string())
        );
        let spec = MixedSpec { martingale, holder: holder.map(Box::new), coupling };
        Self::build(ModelKind::Mixed(spec), horizon, label)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same process multiplied by `sqrt(factor)`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("variance scale must be positive, got {factor}")));
        }
        self.variance_scale *= factor;
        self.label = format!("{}*{factor}", self.label);
        Ok(self)
    }

    /// The model divided by `sqrt(V*)`, so that its variance is at most one.
    pub fn rescaled_unit(self) -> Result<Self> {
        let v = self.sup_variance()?;
        if !(v > 0.0) {
            return Err(Error::InvalidParameter("model has zero variance".into()));
        }
        self.scaled(1.0 / v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.variance_scale > 0.0) {
            return Err(Error::InvalidParameter("variance scale must be positive".into()));
        }
        match &self.kind {
            ModelKind::Fbm { hurst } if !(*hurst > 0.0 && *hurst < 1.0) => {
                Err(Error::InvalidParameter(format!("Hurst index must be in (0, 1), got {hurst}")))
            }
            ModelKind::Fbm { .. } => Ok(()),
            ModelKind::Stationary { kernel } => kernel.validate(),
            ModelKind::GaussianMartingale { bracket } => bracket.validate(),
            ModelKind::Mixed(spec) => {
                spec.martingale.validate()?;
                if let Some(h) = &spec.holder {
                    if matches!(h.kind, ModelKind::Mixed(_)) {
                        return Err(Error::InvalidParameter("Hölder part cannot itself be mixed".into()));
                    }
                    if h.horizon < self.horizon {
                        return Err(Error::InvalidParameter("Hölder part horizon is shorter than the model's".into()));
                    }
                    h.validate()?;
                }
                match spec.coupling {
                    Some(rho) if !(-0.5..=0.5).contains(&rho) => {
                        Err(Error::InvalidParameter(format!("coupling rho must be in [-0.5, 0.5], got {rho}")))
                    }
                    Some(_) if spec.holder.is_none() => {
                        Err(Error::InvalidParameter("coupling needs a Hölder part".into()))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn stationarity(&self) -> Stationarity {
        match &self.kind {
            ModelKind::Fbm { .. } => Stationarity::StationaryIncrements,
            ModelKind::Stationary { .. } => Stationarity::Stationary,
            ModelKind::GaussianMartingale { bracket: BracketFn::Linear { .. } } => Stationarity::StationaryIncrements,
            ModelKind::GaussianMartingale { .. } => Stationarity::General,
            ModelKind::Mixed(_) => Stationarity::General,
        }
    }

    /// Nominal Hölder index `alpha` of the family, when it has one.
    pub fn class_index(&self) -> Option<f64> {
        match &self.kind {
            ModelKind::Fbm { hurst } => Some(*hurst),
            ModelKind::Stationary { kernel } => kernel.local_exponent().map(|p| p / 2.0),
            ModelKind::GaussianMartingale { bracket } => (!bracket.is_zero()).then_some(0.5),
            ModelKind::Mixed(spec) => {
                if spec.martingale.is_zero() {
                    spec.holder.as_ref().and_then(|h| h.class_index())
                } else {
                    Some(0.5)
                }
            }
        }
    }

    pub fn is_coupled(&self) -> bool {
        matches!(&self.kind, ModelKind::Mixed(MixedSpec { coupling: Some(_), .. }))
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || t > self.horizon * (1.0 + 1e-12) || t.is_nan() {
            Err(Error::OutOfHorizon { t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// `(R(s,t), W(s,t), V(s), V(t))` without domain checks.
    pub(crate) fn raw(&self, s: f64, t: f64) -> Result<(f64, f64, f64, f64)> {
        let c = self.variance_scale;
        let (r, w, vs, vt) = match &self.kind {
            ModelKind::Fbm { hurst } => {
                let two_h = 2.0 * hurst;
                let (vs, vt) = (s.powf(two_h), t.powf(two_h));
                let w = (t - s).abs().powf(two_h);
                (0.5 * (vs + vt - w), w, vs, vt)
            }
            ModelKind::Stationary { kernel } => (kernel.r(t - s), 2.0 * kernel.one_minus_r(t - s), 1.0, 1.0),
            ModelKind::GaussianMartingale { bracket } => {
                let (bs, bt) = (bracket.value(s), bracket.value(t));
                (bs.min(bt), (bt - bs).abs(), bs, bt)
            }
            ModelKind::Mixed(spec) => {
                if spec.coupling.is_some() {
                    return Err(Error::GridDependentKernel(self.label.clone()));
                }
                let (bs, bt) = (spec.martingale.value(s), spec.martingale.value(t));
                let (mut r, mut w, mut vs, mut vt) = (bs.min(bt), (bt - bs).abs(), bs, bt);
                if let Some(h) = &spec.holder {
                    let (r2, w2, vs2, vt2) = h.raw(s, t)?;
                    r += r2;
                    w += w2;
                    vs += vs2;
                    vt += vt2;
                }
                (r, w, vs, vt)
            }
        };
        Ok((c * r, c * w, c * vs, c * vt))
    }

    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(s)?;
        self.check_time(t)?;
        Ok(self.raw(s, t)?.0)
    }

    pub fn variance(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.raw(t, t)?.2)
    }

    /// `V* = sup_{[0,T]} V`.
    pub fn sup_variance(&self) -> Result<f64> {
        let t = self.horizon;
        match &self.kind {
            ModelKind::Fbm { .. } | ModelKind::GaussianMartingale { .. } | ModelKind::Stationary { .. } => {
                self.variance(t)
            }
            ModelKind::Mixed(_) => {
                let n = 2000;
                let mut best: f64 = 0.0;
                for i in 0..=n {
                    best = best.max(self.variance(t * i as f64 / n as f64)?);
                }
                Ok(best)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(CovarianceModel::fbm(1.0, 1.0).is_err());
        assert!(CovarianceModel::fbm(0.5, 0.0).is_err());
        assert!(CovarianceModel::stationary(StationaryKernel::Exponential { rate: -1.0 }, 1.0).is_err());
        let x = CovarianceModel::fbm(0.8, 1.0).unwrap();
        assert!(CovarianceModel::mixed(BracketFn::Linear { rate: 1.0 }, Some(x.clone()), Some(0.7), 1.0).is_err());
        assert!(CovarianceModel::mixed(BracketFn::Linear { rate: 1.0 }, Some(x), Some(0.3), 1.0).is_ok());
    }

    #[test]
    fn fbm_closed_form() {
        let m = CovarianceModel::fbm(0.75, 1.0).unwrap();
        assert!((m.covariance(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.variance(0.25).unwrap() - 0.125).abs() < 1e-15);
        assert!(m.covariance(0.5, 1.5).is_err());
    }

    #[test]
    fn rescaling_brings_sup_variance_to_one() {
        let m = CovarianceModel::brownian(2.0).unwrap().rescaled_unit().unwrap();
        assert!((m.sup_variance().unwrap() - 1.0).abs() < 1e-15);
        assert!((m.covariance(1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn class_indices() {
        let k = StationaryKernel::PowerExponential { rate: 1.0, power: 1.2 };
        assert_eq!(CovarianceModel::stationary(k, 1.0).unwrap().class_index(), Some(0.6));
        assert_eq!(CovarianceModel::stationary(StationaryKernel::Constant, 1.0).unwrap().class_index(), None);
    }
}
