//! Strict TOML experiment configuration. Every table rejects unknown keys.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Simulate,
    Fracnorm,
    Integrate,
    Localtime,
    Tanaka,
    Crossing,
    Hedge,
    Membership,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Fracnorm => "fracnorm",
            Kind::Integrate => "integrate",
            Kind::Localtime => "localtime",
            Kind::Tanaka => "tanaka",
            Kind::Crossing => "crossing",
            Kind::Hedge => "hedge",
            Kind::Membership => "membership",
        }
    }
}

/// The Gaussian model driving an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Bm,
    Fbm {
        hurst: f64,
    },
    /// Stationary with `r(u) = exp(-rate u)`.
    Ou {
        rate: f64,
    },
    /// Stationary with `r(u) = exp(-(rate u)^power)`.
    PowerExp {
        rate: f64,
        power: f64,
    },
    /// Gaussian martingale with bracket `scale * t^exponent`.
    Martingale {
        scale: f64,
        #[serde(default = "one")]
        exponent: f64,
    },
    /// `Y = M + X` with `<M>_t = rate * t` and `X` an fbm.
    Mixed {
        #[serde(default = "one")]
        bracket_rate: f64,
        holder_hurst: Option<f64>,
        coupling: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Fbm { hurst: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub horizon: f64,
    /// Numbers of cells; every size must divide the largest.
    pub sizes: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { horizon: 1.0, sizes: vec![1024] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FracnormSection {
    pub betas: Vec<f64>,
}

impl Default for FracnormSection {
    fn default() -> Self {
        Self { betas: vec![0.3, 0.5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    Identity,
    Sin,
    Square,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrateSection {
    pub integrand: Integrand,
    /// Level of `1{X > level}` for the indicator integrand.
    pub level: f64,
    /// Coarsest dyadic level of the partition sequence.
    pub min_level: u32,
    /// Order for the generalized Lebesgue-Stieltjes value; omitted means no GLS output.
    pub beta: Option<f64>,
}

impl Default for IntegrateSection {
    fn default() -> Self {
        Self { integrand: Integrand::Sin, level: 0.0, min_level: 4, beta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Realized,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Interpolated,
    LeftPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocaltimeSection {
    pub epsilon: Option<f64>,
    pub levels: usize,
    /// Number of output times (plus the terminal time).
    pub times: usize,
    pub clock: Clock,
    pub rule: Rule,
}

impl Default for LocaltimeSection {
    fn default() -> Self {
        Self { epsilon: None, levels: 81, times: 16, clock: Clock::Realized, rule: Rule::Interpolated }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TanakaSection {
    /// Payoff syntax: `call(K)`, `put(K)`, `abs(a)`, `lincomb(w*call(K)+...)`.
    pub payoff: String,
    /// Shift the payoff so its kinks are measured from each path's start value.
    pub relative_to_start: bool,
    pub transform: Transform,
    pub epsilon: Option<f64>,
    pub clock: Clock,
    pub gls_cross_check: bool,
}

impl Default for TanakaSection {
    fn default() -> Self {
        Self {
            payoff: "call(0)".into(),
            relative_to_start: true,
            transform: Transform::Identity,
            epsilon: None,
            clock: Clock::Realized,
            gls_cross_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PointSet {
    #[default]
    Validation,
    HeldOut,
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingSection {
    pub points: PointSet,
    pub samples: usize,
    pub margin: f64,
}

impl Default for CrossingSection {
    fn default() -> Self {
        Self { points: PointSet::Validation, samples: 100_000, margin: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedgeSection {
    pub strike: f64,
    pub s0: f64,
    /// Constant drift `mu`.
    pub mu: f64,
    /// Cutout widths as multiples of the reference width.
    pub cutouts: Vec<f64>,
    pub epsilon: Option<f64>,
}

impl Default for HedgeSection {
    fn default() -> Self {
        Self { strike: 1.0, s0: 1.0, mu: 0.0, cutouts: vec![4.0, 2.0, 1.0], epsilon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembershipSection {
    /// Defaults to the model's own class index.
    pub alpha: Option<f64>,
    pub exponent_tol: f64,
}

impl Default for MembershipSection {
    fn default() -> Self {
        Self { alpha: None, exponent_tol: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub replicas: usize,
    pub out: Option<PathBuf>,
    pub model: ModelSpec,
    pub grid: GridSection,
    pub fracnorm: FracnormSection,
    pub integrate: IntegrateSection,
    pub localtime: LocaltimeSection,
    pub tanaka: TanakaSection,
    pub crossing: CrossingSection,
    pub hedge: HedgeSection,
    pub membership: MembershipSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            replicas: 1,
            out: None,
            model: ModelSpec::default(),
            grid: GridSection::default(),
            fracnorm: FracnormSection::default(),
            integrate: IntegrateSection::default(),
            localtime: LocaltimeSection::default(),
            tanaka: TanakaSection::default(),
            crossing: CrossingSection::default(),
            hedge: HedgeSection::default(),
            membership: MembershipSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Checks that do not depend on the experiment kind.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.grid.sizes.is_empty() || self.grid.sizes.contains(&0) {
            return bad("grid.sizes must be a nonempty list of positive cell counts".into());
        }
        let finest = self.finest();
        if let Some(n) = self.grid.sizes.iter().find(|&&n| !finest.is_multiple_of(n)) {
            return bad(format!("grid size {n} does not divide the finest size {finest}"));
        }
        if !(self.grid.horizon > 0.0) {
            return bad(format!("grid.horizon must be positive, got {}", self.grid.horizon));
        }
        Ok(())
    }

    pub fn finest(&self) -> usize {
        self.grid.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Sizes in increasing order without repeats.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = self.grid.sizes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Loads a config file (or the defaults) and applies command-line overrides.
pub fn load(
    path: Option<&PathBuf>,
    kind: Kind,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    match cfg.kind {
        Some(k) if k != kind => {
            return Err(CliError::Config(format!(
                "config is for `{}` but the `{}` subcommand was invoked",
                k.name(),
                kind.name()
            )))
        }
        _ => cfg.kind = Some(kind),
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.out = out;
    }
    if cfg.out.is_none() {
        return Err(CliError::Config("no output directory: pass --out or set `out`".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::parse("sede = 3").unwrap_err().to_string();
        assert!(e.contains("sede"), "{e}");
        let e = ExperimentConfig::parse("[model]\ntype = \"fbm\"\nhurts = 0.3").unwrap_err().to_string();
        assert!(e.contains("hurts"), "{e}");
        let e = ExperimentConfig::parse("[hedge]\nstrik = 1.0").unwrap_err().to_string();
        assert!(e.contains("strik"), "{e}");
    }

    #[test]
    fn model_sections_parse() {
        let c = ExperimentConfig::parse("[model]\ntype = \"mixed\"\nholder_hurst = 0.8\n").unwrap();
        assert_eq!(c.model, ModelSpec::Mixed { bracket_rate: 1.0, holder_hurst: Some(0.8), coupling: None });
        let c = ExperimentConfig::parse("[model]\ntype = \"power_exp\"\nrate = 1.0\npower = 1.2\n").unwrap();
        assert_eq!(c.model, ModelSpec::PowerExp { rate: 1.0, power: 1.2 });
    }

    #[test]
    fn sizes_must_nest() {
        let mut c = ExperimentConfig::default();
        c.grid.sizes = vec![1024, 768];
        assert!(c.validate().is_err());
        c.grid.sizes = vec![256, 1024, 512];
        assert!(c.validate().is_ok());
        assert_eq!(c.sizes(), vec![256, 512, 1024]);
    }
}
