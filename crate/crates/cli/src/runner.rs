//! One runner per experiment kind. Each returns the tables it produced.

use pathwise::convex_fn::{parse_payoff, ConvexCombination, MonotoneMap};
use pathwise::crossing::{
    calibrate, calibration_points, crossing_bound, exact_crossing_prob, held_out_points, mc_crossing_prob,
    validation_points,
};
use pathwise::frac_calc::{besov_w1_norm, besov_w2_norm};
use pathwise::gaussian_paths::{
    check_class_membership, sample_mixed, sample_paths, BracketFn, CovarianceModel, MembershipConfig, MixedEnsemble,
    ModelKind, StationaryKernel,
};
use pathwise::hedging::{base_cutout_width, cutout_costs, price_path, replication_report};
use pathwise::integrators::{follmer_limit, gls_integral, Partition, PartitionSequence};
use pathwise::local_time::{
    default_epsilon, default_levels, estimate_local_time_with, occupation_residual, FieldOptions, WindowRule,
};
use pathwise::numeric::{mean, median};
use pathwise::tanaka::{realized_clock, tanaka_on_path, transformed_residual, ClockSource, LocalTimeConfig};
use pathwise::{BracketPath, SampledPath, TimeGrid};

use crate::config::{Clock, ExperimentConfig, Integrand, Kind, ModelSpec, PointSet, Rule, Transform};
use crate::output::{Cell, Table};
use crate::CliError;

pub fn build_model(spec: &ModelSpec, horizon: f64) -> Result<CovarianceModel, CliError> {
    let m = match *spec {
        ModelSpec::Bm => CovarianceModel::brownian(horizon),
        ModelSpec::Fbm { hurst } => CovarianceModel::fbm(hurst, horizon),
        ModelSpec::Ou { rate } => CovarianceModel::stationary(StationaryKernel::Exponential { rate }, horizon),
        ModelSpec::PowerExp { rate, power } => {
            CovarianceModel::stationary(StationaryKernel::PowerExponential { rate, power }, horizon)
        }
        ModelSpec::Martingale { scale, exponent } => {
            let b =
                if exponent == 1.0 { BracketFn::Linear { rate: scale } } else { BracketFn::Power { scale, exponent } };
            CovarianceModel::martingale(b, horizon)
        }
        ModelSpec::Mixed { bracket_rate, holder_hurst, coupling } => {
            let holder = holder_hurst.map(|h| CovarianceModel::fbm(h, horizon)).transpose()?;
            CovarianceModel::mixed(BracketFn::Linear { rate: bracket_rate }, holder, coupling, horizon)
        }
    };
    Ok(m?)
}

/// A draw with the bracket of its martingale part when the model has one in closed form.
struct Draw {
    y: SampledPath,
    bracket: Option<BracketPath>,
    mixed: Option<MixedEnsemble>,
}

fn analytic_bracket(model: &CovarianceModel, grid: &TimeGrid) -> Result<Option<BracketPath>, CliError> {
    let b = match &model.kind {
        ModelKind::Fbm { hurst } if *hurst == 0.5 => {
            let s = model.variance_scale;
            Some(BracketPath::from_fn(grid, |t| s * t)?)
        }
        ModelKind::Fbm { hurst } if *hurst > 0.5 => Some(BracketPath::zero(grid)),
        ModelKind::GaussianMartingale { bracket } => {
            let s = model.variance_scale;
            let b0 = bracket.value(grid.start());
            Some(BracketPath::from_fn(grid, |t| s * (bracket.value(t) - b0))?)
        }
        _ => None,
    };
    Ok(b)
}

fn draws(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<(TimeGrid, Vec<Draw>), CliError> {
    let grid = TimeGrid::uniform(cfg.grid.horizon, cfg.finest())?;
    let out = if matches!(model.kind, ModelKind::Mixed(_)) {
        sample_mixed(model, &grid, cfg.replicas, cfg.seed)?
            .into_iter()
            .map(|e| Draw { y: e.y.clone(), bracket: Some(e.bracket.clone()), mixed: Some(e) })
            .collect()
    } else {
        let b = analytic_bracket(model, &grid)?;
        sample_paths(model, &grid, cfg.replicas, cfg.seed)?
            .into_iter()
            .map(|y| Draw { y, bracket: b.clone(), mixed: None })
            .collect()
    };
    Ok((grid, out))
}

fn single_path(cfg: &ExperimentConfig, kind: Kind) -> Result<(), CliError> {
    if cfg.replicas != 1 {
        return Err(CliError::Config(format!("`{}` works on one path; set replicas = 1", kind.name())));
    }
    Ok(())
}

fn rule(r: Rule) -> WindowRule {
    match r {
        Rule::Interpolated => WindowRule::Interpolated,
        Rule::LeftPoint => WindowRule::LeftPoint,
    }
}

fn clock_for(draw: &Draw, y: &SampledPath, clock: Clock) -> Result<BracketPath, CliError> {
    match clock {
        Clock::Realized => Ok(realized_clock(y)?),
        Clock::Analytic => match &draw.bracket {
            Some(b) if b.grid().times() == y.grid().times() => Ok(b.clone()),
            Some(b) => {
                let stride = (b.grid().cells() / y.grid().cells()).max(1);
                Ok(b.subsample(stride)?)
            }
            None => Err(CliError::Config("the model has no closed-form bracket; use clock = \"realized\"".into())),
        },
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let kind = cfg.kind.ok_or_else(|| CliError::Config("experiment kind is not set".into()))?;
    let model = build_model(&cfg.model, cfg.grid.horizon)?;
    match kind {
        Kind::Simulate => simulate(cfg, &model),
        Kind::Fracnorm => fracnorm(cfg, &model),
        Kind::Integrate => integrate(cfg, &model),
        Kind::Localtime => localtime(cfg, &model),
        Kind::Tanaka => tanaka(cfg, &model),
        Kind::Crossing => crossing(cfg, &model),
        Kind::Hedge => hedge(cfg, &model),
        Kind::Membership => membership(cfg, &model),
    }
}

fn simulate(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    let (grid, draws) = draws(cfg, model)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..draws.len()).map(|i| format!("path_{i}")));
    let mut paths = Table::with_header("paths.csv", header.clone());
    for (k, &t) in grid.times().iter().enumerate() {
        let mut row = vec![Cell::F(t)];
        row.extend(draws.iter().map(|d| Cell::F(d.y.values()[k])));
        paths.push(row);
    }
    let mut tables = vec![paths];
    if draws[0].mixed.is_some() {
        let mut br = Table::with_header("brackets.csv", header);
        for (k, &t) in grid.times().iter().enumerate() {
            let mut row = vec![Cell::F(t)];
            row.extend(draws.iter().map(|d| Cell::F(d.bracket.as_ref().map_or(0.0, |b| b.values()[k]))));
            br.push(row);
        }
        tables.push(br);
    }
    Ok(tables)
}

fn fracnorm(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    single_path(cfg, Kind::Fracnorm)?;
    let (_, draws) = draws(cfg, model)?;
    let y = &draws[0].y;
    let mut t = Table::new("fracnorm.csv", &["beta", "grid_n", "norm_w1", "norm_w2"]);
    for &beta in &cfg.fracnorm.betas {
        for n in cfg.sizes() {
            let p = y.subsample(cfg.finest() / n)?;
            let w1 = besov_w1_norm(&p, beta)?;
            let w2 = besov_w2_norm(&p, beta)?;
            t.push(vec![beta.into(), p.len().into(), w1.value.into(), w2.value.into()]);
        }
    }
    Ok(vec![t])
}

fn integrand(cfg: &ExperimentConfig, x: &SampledPath) -> SampledPath {
    let level = cfg.integrate.level;
    match cfg.integrate.integrand {
        Integrand::Identity => x.clone(),
        Integrand::Sin => x.map(f64::sin),
        Integrand::Square => x.map(|v| v * v),
        Integrand::Indicator => x.map(|v| if v > level { 1.0 } else { 0.0 }),
    }
}

fn dyadic_level(n: usize) -> Result<u32, CliError> {
    if n.is_power_of_two() {
        Ok(n.trailing_zeros())
    } else {
        Err(CliError::Config(format!("`integrate` needs a power-of-two finest size, got {n}")))
    }
}

fn integrate(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    single_path(cfg, Kind::Integrate)?;
    let (_, draws) = draws(cfg, model)?;
    let x = &draws[0].y;
    let top = dyadic_level(cfg.finest())?;
    if cfg.integrate.min_level >= top {
        return Err(CliError::Config(format!("integrate.min_level must be below {top}")));
    }
    let f = integrand(cfg, x);
    let seq = PartitionSequence::dyadic(cfg.grid.horizon, cfg.integrate.min_level..=top)?;
    let rec = follmer_limit(&f, x, &seq)?;
    let mut t = Table::new("integrate.csv", &["level", "mesh", "value"]);
    for (i, (v, m)) in rec.values.iter().zip(&rec.meshes).enumerate() {
        t.push(vec![(cfg.integrate.min_level + i as u32).into(), (*m).into(), (*v).into()]);
    }
    let mut tables = vec![t];
    if let Some(beta) = cfg.integrate.beta {
        let mut g = Table::new("gls.csv", &["beta", "grid_n", "value", "bound", "within_bound"]);
        for n in cfg.sizes() {
            let xs = x.subsample(cfg.finest() / n)?;
            let r = gls_integral(&integrand(cfg, &xs), &xs, beta)?;
            g.push(vec![beta.into(), r.grid_n.into(), r.value.into(), r.bound.into(), r.within_bound().into()]);
        }
        tables.push(g);
    }
    Ok(tables)
}

fn localtime(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    single_path(cfg, Kind::Localtime)?;
    let (_, draws) = draws(cfg, model)?;
    let d = &draws[0];
    let y = &d.y;
    let s = &cfg.localtime;
    let clock = clock_for(d, y, s.clock)?;
    let eps = s.epsilon.unwrap_or_else(|| default_epsilon(y));
    if !(eps > 0.0) {
        return Err(CliError::Config(format!("localtime.epsilon must be positive, got {eps}")));
    }
    let levels = default_levels(y, eps, s.levels.max(2));
    let stride = (y.grid().cells() / s.times.max(1)).max(1);
    let opts = FieldOptions { rule: rule(s.rule), time_stride: stride };
    let field = estimate_local_time_with(y, &clock, &levels, eps, &opts)?;
    let mut t = Table::new("localtime.csv", &["a", "t", "L"]);
    for (k, &time) in field.times().iter().enumerate() {
        for (j, &a) in field.levels().iter().enumerate() {
            t.push(vec![a.into(), time.into(), field.value(k, j).into()]);
        }
    }
    let mut occ = Table::new("occupation.csv", &["g", "level_side", "clock_side", "residual"]);
    let full = FieldOptions { rule: rule(s.rule), time_stride: 1 };
    let full_field = estimate_local_time_with(y, &clock, &levels, eps, &full)?;
    for (name, g) in [("one", (|_| 1.0) as fn(f64) -> f64), ("nonnegative", |a| if a >= 0.0 { 1.0 } else { 0.0 })] {
        let r = occupation_residual(y, &clock, g, &full_field)?;
        occ.push(vec![name.into(), r.level_side.into(), r.clock_side.into(), r.residual.into()]);
    }
    Ok(vec![t, occ])
}

fn lt_config(epsilon: Option<f64>, clock: Clock, gls: bool) -> LocalTimeConfig {
    LocalTimeConfig {
        epsilon,
        clock: match clock {
            Clock::Realized => ClockSource::Realized,
            Clock::Analytic => ClockSource::Analytic,
        },
        gls_cross_check: gls,
        ..LocalTimeConfig::default()
    }
}

fn shifted(f: &ConvexCombination, by: f64) -> Result<ConvexCombination, CliError> {
    if by == 0.0 {
        return Ok(f.clone());
    }
    let atoms =
        f.atoms().iter().map(|a| pathwise::convex_fn::Atom { location: a.location + by, weight: a.weight }).collect();
    let density = match f.density() {
        Some(d) => Some(pathwise::convex_fn::PiecewiseDensity::new(
            d.breaks().iter().map(|b| b + by).collect(),
            d.values().to_vec(),
        )?),
        None => None,
    };
    // keep f(x - by) by moving the affine part with the kinks
    Ok(ConvexCombination::new(f.slope(), f.intercept() - f.slope() * by, atoms, density)?)
}

fn partitions(cfg: &ExperimentConfig) -> Result<Vec<Partition>, CliError> {
    cfg.sizes().into_iter().map(|n| Ok(Partition::from_grid(&TimeGrid::uniform(cfg.grid.horizon, n)?))).collect()
}

fn tanaka(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    let s = &cfg.tanaka;
    let base = parse_payoff(&s.payoff)?;
    let (_, draws) = draws(cfg, model)?;
    let lt = lt_config(s.epsilon, s.clock, s.gls_cross_check);
    let map = match s.transform {
        Transform::Identity => MonotoneMap::Identity,
        Transform::Exp => MonotoneMap::Exp,
    };
    let mut per_path = Table::new("tanaka.csv", &["path_id", "grid_n", "lhs", "integral", "lt_term", "residual"]);
    let mut summary = Table::new(
        "tanaka_summary.csv",
        &["grid_n", "paths", "median_abs_residual", "mean_abs_residual", "mean_lt_term", "median_relative"],
    );
    for part in partitions(cfg)? {
        let mut abs = Vec::new();
        let mut lts = Vec::new();
        let mut rel = Vec::new();
        for (i, d) in draws.iter().enumerate() {
            let start = match s.transform {
                Transform::Identity => d.y.first(),
                Transform::Exp => d.y.first().exp(),
            };
            let f = if s.relative_to_start { shifted(&base, start)? } else { base.clone() };
            let r = match (s.transform, &d.mixed) {
                (Transform::Exp, _) => {
                    if d.bracket.as_ref().is_some_and(|b| !b.is_zero()) || d.bracket.is_none() {
                        return Err(CliError::Config(
                            "transform = \"exp\" needs a zero-bracket model (fbm with hurst > 0.5)".into(),
                        ));
                    }
                    transformed_residual(&map, &f, &d.y, &part, None)?
                }
                (Transform::Identity, Some(e)) => pathwise::tanaka::tanaka_residual(&f, e, &part, &lt)?,
                (Transform::Identity, None) => tanaka_on_path(&f, &d.y, d.bracket.as_ref(), &part, &lt)?,
            };
            per_path.push(vec![
                i.into(),
                r.grid_n.into(),
                r.lhs.into(),
                r.integral.into(),
                r.lt_term.into(),
                r.residual.into(),
            ]);
            abs.push(r.residual.abs());
            lts.push(r.lt_term.abs());
            rel.push(r.relative());
        }
        summary.push(vec![
            (part.len()).into(),
            draws.len().into(),
            median(&abs).into(),
            mean(&abs).into(),
            mean(&lts).into(),
            median(&rel).into(),
        ]);
    }
    Ok(vec![per_path, summary])
}

fn crossing(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    let h = cfg.grid.horizon;
    let c = &cfg.crossing;
    if c.samples < 1000 {
        return Err(CliError::Config(format!("crossing.samples must be at least 1000, got {}", c.samples)));
    }
    let reference: Vec<CovarianceModel> = [
        CovarianceModel::brownian(h)?,
        CovarianceModel::fbm(0.3, h)?,
        CovarianceModel::fbm(0.75, h)?,
        CovarianceModel::stationary(StationaryKernel::Exponential { rate: 1.0 }, h)?,
    ]
    .into_iter()
    .map(|m| m.rescaled_unit())
    .collect::<Result<_, _>>()?;
    let constants = calibrate(&reference, &calibration_points(h), c.margin)?;
    let target = model.clone().rescaled_unit()?;
    let points = match c.points {
        PointSet::Validation => validation_points(h),
        PointSet::HeldOut => held_out_points(h),
        PointSet::Calibration => calibration_points(h),
    };
    let mut t = Table::new("crossing.csv", &["s", "t", "a", "exact", "mc", "se", "bound_total", "satisfied"]);
    for (j, &(s, tt, a)) in points.iter().enumerate() {
        let exact = exact_crossing_prob(&target, s, tt, a)?;
        let mc = mc_crossing_prob(&target, s, tt, a, c.samples, cfg.seed.wrapping_add(j as u64))?;
        let b = crossing_bound(&target, s, tt, a, &constants)?;
        t.push(vec![
            s.into(),
            tt.into(),
            a.into(),
            exact.into(),
            mc.estimate.into(),
            mc.standard_error.into(),
            b.total.into(),
            b.satisfied.into(),
        ]);
    }
    let mut k = Table::new("constants.csv", &["case_i", "case_ii", "universal"]);
    k.push(vec![constants.case_i.into(), constants.case_ii.into(), constants.universal.into()]);
    Ok(vec![t, k])
}

fn hedge(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    let s = &cfg.hedge;
    if !(s.strike > 0.0) || !(s.s0 > 0.0) {
        return Err(CliError::Config("hedge.strike and hedge.s0 must be positive".into()));
    }
    let (_, draws) = draws(cfg, model)?;
    let lt = lt_config(s.epsilon, Clock::Realized, false);
    let mut header: Vec<String> =
        ["path_id", "payoff", "initial", "gains", "half_L", "residual"].iter().map(|s| s.to_string()).collect();
    header.extend(s.cutouts.iter().map(|m| format!("cutouts_eps_{m}")));
    let mut t = Table::with_header("hedge.csv", header);
    let part = Partition::from_grid(draws[0].y.grid());
    for (i, d) in draws.iter().enumerate() {
        let bracket = d.bracket.clone().ok_or_else(|| {
            CliError::Config(
                "hedging needs a model with a closed-form bracket (bm, fbm with hurst >= 0.5, martingale, mixed)"
                    .into(),
            )
        })?;
        let mu = s.mu;
        let p = price_path(&d.y, &bracket, move |_| mu, s.s0)?;
        let r = replication_report(&p, s.strike, &part, &lt)?;
        let mut row: Vec<Cell> = vec![
            i.into(),
            r.payoff.into(),
            r.initial.into(),
            r.gains.into(),
            r.half_local_time.into(),
            r.residual.into(),
        ];
        let e0 = base_cutout_width(&p, s.strike);
        for &m in &s.cutouts {
            // a width at or above the strike has no meaning; the cell is left as NaN
            let eps = m * e0;
            let cost = if eps < s.strike { cutout_costs(&p, s.strike, eps)?.total } else { f64::NAN };
            row.push(cost.into());
        }
        t.push(row);
    }
    Ok(vec![t])
}

fn membership(cfg: &ExperimentConfig, model: &CovarianceModel) -> Result<Vec<Table>, CliError> {
    let alpha = match cfg.membership.alpha.or_else(|| model.class_index()) {
        Some(a) => a,
        None => return Err(CliError::Config("membership.alpha is required for this model".into())),
    };
    let mc = MembershipConfig { exponent_tol: cfg.membership.exponent_tol, ..MembershipConfig::default() };
    let r = check_class_membership(model, alpha, &mc)?;
    let mut t = Table::new(
        "membership.csv",
        &[
            "alpha",
            "positive_r",
            "worst_s",
            "worst_t",
            "worst_r",
            "w_star_exponent",
            "w_star_residual",
            "w_star_passed",
            "variance_c",
            "variance_delta",
            "variance_passed",
            "ratio_sup",
            "ratio_passed",
            "verdict",
        ],
    );
    t.push(vec![
        r.alpha.into(),
        r.positive_r.passed.into(),
        r.positive_r.worst.0.into(),
        r.positive_r.worst.1.into(),
        r.positive_r.worst.2.into(),
        r.w_star.exponent.into(),
        r.w_star.residual.into(),
        r.w_star.passed.into(),
        r.variance_lower.c.into(),
        r.variance_lower.delta.into(),
        r.variance_lower.passed.into(),
        r.ratio_sup.sup.into(),
        r.ratio_sup.passed.into(),
        format!("{:?}", r.verdict).to_lowercase().into(),
    ]);
    Ok(vec![t])
}
