//! Library values checked against references computed independently here:
//! closed forms, plain Simpson quadrature, and Monte Carlo moments.

use pathwise::convex_fn::{C2Function, ConvexCombination, MonotoneMap};
use pathwise::crossing::{exact_crossing_prob, mc_crossing_prob, ratio_inequality_check, tail_bound};
use pathwise::frac_calc::{besov_w1_norm, besov_w2_norm, frac_derivative, frac_integral, FracOrder};
use pathwise::gaussian_paths::{sample_mixed, sample_paths, BracketFn, CovarianceModel};
use pathwise::hedging::{price_path, stop_loss_pnl};
use pathwise::integrators::{follmer_limit, gls_integral, truncate_at, Partition, PartitionSequence, StopRule};
use pathwise::tanaka::transformed_residual;
use pathwise::{BracketPath, SampledPath, TimeGrid};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v)
}

#[test]
fn riemann_liouville_integral_of_identity() {
    // (1/Gamma(1/2)) int_0^1 (1-u)^{-1/2} u du, with w = (1-u)^{1/2} making the integrand smooth
    let q = 2.0 * simpson(|w| 1.0 - w * w, 0.0, 1.0, 200);
    let oracle = q / std::f64::consts::PI.sqrt();
    let g = TimeGrid::uniform(1.0, 256).unwrap();
    let f = SampledPath::from_fn(&g, "s", |s| s);
    let v = frac_integral(&f, FracOrder::left(0.5).unwrap()).unwrap().last();
    assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    assert!((v - 0.7523).abs() < 1e-4);
}

#[test]
fn weyl_derivative_of_identity() {
    let oracle = 2.0 / std::f64::consts::PI.sqrt();
    let g = TimeGrid::uniform(1.0, 256).unwrap();
    let f = SampledPath::from_fn(&g, "s", |s| s);
    let v = frac_derivative(&f, FracOrder::left(0.5).unwrap()).unwrap().last();
    assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
}

#[test]
fn besov_norms_of_identity() {
    // W1: sup (t-s)^{1/2} + 2 (t-s)^{1/2} at (0, 1) is 3; W2: 2/3 + 4/3 = 2
    let g = TimeGrid::uniform(1.0, 512).unwrap();
    let f = SampledPath::from_fn(&g, "s", |s| s);
    let w1 = besov_w1_norm(&f, 0.5).unwrap().value;
    assert!((w1 - 3.0).abs() < 1e-9, "{w1}");
    let mut prev = f64::INFINITY;
    for n in [128, 256, 512, 1024] {
        let f = SampledPath::from_fn(&TimeGrid::uniform(1.0, n).unwrap(), "s", |s| s);
        let gap = (besov_w2_norm(&f, 0.5).unwrap().value - 2.0).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-2, "{prev}");
}

#[test]
fn besov_norm_of_smooth_fbm_path_is_stable() {
    let model = CovarianceModel::fbm(0.8, 1.0).unwrap();
    let p = &sample_paths(&model, &TimeGrid::uniform(1.0, 1 << 12).unwrap(), 1, 3).unwrap()[0];
    let coarse = besov_w1_norm(&p.subsample(4).unwrap(), 0.5).unwrap().value;
    let fine = besov_w1_norm(p, 0.5).unwrap().value;
    assert!(((fine - coarse) / coarse).abs() < 0.05, "{coarse} {fine}");
}

#[test]
fn mixed_variance_adds() {
    let model = CovarianceModel::mixed(
        BracketFn::Linear { rate: 1.0 },
        Some(CovarianceModel::fbm(0.8, 1.0).unwrap()),
        None,
        1.0,
    )
    .unwrap();
    let ens = sample_mixed(&model, &TimeGrid::uniform(1.0, 32).unwrap(), 10_000, 11).unwrap();
    let y1: Vec<f64> = ens.iter().map(|e| e.y.last()).collect();
    let (_, v) = mean_var(&y1);
    // SE of a sample variance of Gaussians is v sqrt(2/(n-1))
    let se = 2.0 * (2.0 / 9999.0f64).sqrt();
    assert!((v - 2.0).abs() < 3.0 * se, "{v}");
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[test]
fn follmer_sums_of_indicator_settle_on_gls_value() {
    // paths with many crossings of the level converge slowly, so the check is on the ensemble median
    let model = CovarianceModel::fbm(0.75, 1.0).unwrap();
    let g = TimeGrid::uniform(1.0, 1 << 14).unwrap();
    let mut spread = Vec::new();
    let mut gap = Vec::new();
    for x in sample_paths(&model, &g, 8, 21).unwrap() {
        let f = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let rec = follmer_limit(&f, &x, &PartitionSequence::dyadic(1.0, 8..=14).unwrap()).unwrap();
        let scale = x.max() - x.min();
        let xs = x.subsample(4).unwrap();
        let gls = gls_integral(&xs.map(|v| if v > 0.0 { 1.0 } else { 0.0 }), &xs, 0.45).unwrap().value;
        spread.push(rec.spread_last(3) / scale);
        gap.push((rec.final_value - gls).abs() / scale);
    }
    let (spread, gap) = (median(spread), median(gap));
    assert!(spread <= 0.02 && gap <= 0.02, "{spread} {gap}");
}

#[test]
fn stopped_integral_agrees_across_methods() {
    let model = CovarianceModel::fbm(0.75, 1.0).unwrap();
    let g = TimeGrid::uniform(1.0, 1 << 12).unwrap();
    for x in sample_paths(&model, &g, 4, 22).unwrap() {
        let f = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let (ft, _) = truncate_at(&f, &StopRule::first_hit_up(0.5, 1.0), &x).unwrap();
        let rs = follmer_limit(&ft, &x, &PartitionSequence::dyadic(1.0, 10..=12).unwrap()).unwrap().final_value;
        let gls = gls_integral(&ft, &x, 0.45).unwrap().value;
        let scale = x.max() - x.min();
        assert!((rs - gls).abs() <= 0.02 * scale, "{rs} vs {gls}");
    }
}

#[test]
fn orthant_crossing_probability() {
    // P(W1 < 0) - P(W1 < 0, W2 < 0) with corr 1/sqrt 2: 1/2 - (1/4 + asin(rho)/(2 pi))
    let rho = 0.5f64.sqrt();
    let oracle = 0.5 - (0.25 + rho.asin() / (2.0 * std::f64::consts::PI));
    let bm = CovarianceModel::brownian(2.0).unwrap();
    let p = exact_crossing_prob(&bm, 1.0, 2.0, 0.0).unwrap();
    assert!((p - oracle).abs() < 1e-8, "{p}");
    let mc = mc_crossing_prob(&bm, 1.0, 2.0, 0.0, 100_000, 5).unwrap();
    assert!((mc.estimate - oracle).abs() < 3.0 * (oracle * (1.0 - oracle) / 1e5).sqrt());
}

#[test]
fn crossing_probability_against_bivariate_quadrature() {
    // P(X_s < a < X_t) by a double Simpson rule on the bivariate normal density
    let m = CovarianceModel::fbm(0.3, 1.0).unwrap();
    let (s, t, a): (f64, f64, f64) = (0.3, 0.8, 0.4);
    let (vs, vt) = (s.powf(0.6), t.powf(0.6));
    let r = 0.5 * (vs + vt - (t - s).powf(0.6));
    let (ss, st) = (vs.sqrt(), vt.sqrt());
    let rho = r / (ss * st);
    let inner = |x: f64| {
        // P(X_t > a | X_s = x) via Simpson on the conditional density
        let mu = rho * st / ss * x;
        let sd = st * (1.0 - rho * rho).sqrt();
        let pdf = |y: f64| (-(y - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        simpson(pdf, a, mu.max(a) + 12.0 * sd, 2000)
    };
    let outer = |x: f64| (-(x * x) / (2.0 * vs)).exp() / (ss * (2.0 * std::f64::consts::PI).sqrt()) * inner(x);
    let oracle = simpson(outer, -12.0 * ss, a, 2000);
    let p = exact_crossing_prob(&m, s, t, a).unwrap();
    assert!((p - oracle).abs() < 1e-7, "{p} vs {oracle}");
}

#[test]
fn tail_bound_dominates_quadrature_tail() {
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for (a, bound) in [(1.0, 0.2420), (3.0, 0.00148)] {
        let exact = simpson(pdf, a, a + 40.0, 20_000);
        let b = tail_bound(a).unwrap();
        assert!((b - bound).abs() < 1e-4 * bound.max(1.0));
        assert!(b >= exact);
    }
    let exact5 = simpson(pdf, 5.0, 45.0, 20_000);
    assert!(tail_bound(5.0).unwrap() / exact5 <= 1.06);
    assert!((simpson(pdf, 1.0, 41.0, 20_000) - 0.1587).abs() < 1e-4);
}

#[test]
fn covariance_ratio_lemma_on_grids() {
    for model in [CovarianceModel::brownian(1.0).unwrap(), CovarianceModel::fbm(0.3, 1.0).unwrap()] {
        for i in 1..=20 {
            for k in i..=20 {
                let r = ratio_inequality_check(&model, i as f64 / 20.0, k as f64 / 20.0).unwrap();
                assert!(r.pass, "{i} {k} {r:?}");
            }
        }
    }
}

#[test]
fn mollified_call_matches_convolution_quadrature() {
    let j = |z: f64| if (-1.0..=0.0).contains(&z) { 30.0 * z * z * (1.0 + z).powi(2) } else { 0.0 };
    let f = ConvexCombination::call(0.3);
    let mut errors = Vec::new();
    for n in [4u32, 8, 16, 32] {
        let m = f.mollify(n).unwrap();
        let nf = n as f64;
        let mut worst: f64 = 0.0;
        for i in 0..41 {
            let x = -1.0 + i as f64 * 0.05;
            let oracle = nf * simpson(|y| (x + y - 0.3).max(0.0) * j(nf * y), -1.0 / nf, 0.0, 4000);
            assert!((m.value(x) - oracle).abs() < 1e-8, "n={n} x={x}");
            worst = worst.max((m.value(x) - (x - 0.3).max(0.0)).abs());
        }
        errors.push(worst * nf);
    }
    // error times n stays bounded
    assert!(errors.iter().all(|&e| e <= 1.0), "{errors:?}");
}

#[test]
fn geometric_brownian_mean_is_initial_price() {
    let g = TimeGrid::uniform(1.0, 64).unwrap();
    let clock = BracketPath::from_fn(&g, |t| t).unwrap();
    let s1: Vec<f64> = sample_paths(&CovarianceModel::brownian(1.0).unwrap(), &g, 20_000, 31)
        .unwrap()
        .iter()
        .map(|y| price_path(y, &clock, |_| 0.0, 2.0).unwrap().s.last())
        .collect();
    let (m, v) = mean_var(&s1);
    assert!((m - 2.0).abs() < 3.0 * (v / s1.len() as f64).sqrt(), "{m}");
}

#[test]
fn out_of_the_money_stop_loss_replicates_without_bracket() {
    let g = TimeGrid::uniform(1.0, 1 << 12).unwrap();
    let zero = BracketPath::zero(&g);
    let ys = sample_paths(&CovarianceModel::fbm(0.8, 1.0).unwrap(), &g, 40, 41).unwrap();
    let mut means = Vec::new();
    for level in [8u32, 10, 12] {
        let part = Partition::dyadic(1.0, level).unwrap();
        let errs: Vec<f64> = ys
            .iter()
            .map(|y| {
                let l = stop_loss_pnl(&price_path(y, &zero, |_| 0.0, 1.0).unwrap(), 1.2, &part).unwrap();
                (l.terminal_wealth - l.payoff).abs()
            })
            .collect();
        means.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn exponential_transform_of_call_on_smooth_fbm() {
    let g = TimeGrid::uniform(1.0, 1 << 14).unwrap();
    let xs = sample_paths(&CovarianceModel::fbm(0.75, 1.0).unwrap(), &g, 20, 51).unwrap();
    let f = ConvexCombination::call(1.0);
    let mut medians = Vec::new();
    for level in [12u32, 13, 14] {
        let part = Partition::dyadic(1.0, level).unwrap();
        let mut rel: Vec<f64> = xs
            .iter()
            .map(|x| {
                let r = transformed_residual(&MonotoneMap::Exp, &f, x, &part, None).unwrap();
                r.residual.abs() / r.payoff_scale
            })
            .collect();
        rel.sort_by(f64::total_cmp);
        medians.push(rel[rel.len() / 2]);
    }
    assert!(medians[2] <= 0.03, "{medians:?}");
    assert!(medians[0] > medians[2], "{medians:?}");
}
