use super::operators::Moments;
use super::{check_beta, uniform_step};
use crate::error::Result;
use crate::path::SampledPath;

/// Grid estimate of a fractional Besov norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub grid_n: usize,
    /// W1: Hölder quotient at the maximising pair. W2: the weighted `|f(s)|/s^beta` integral.
    pub first: f64,
    /// W1: the singular integral at the maximising pair. W2: the double integral.
    pub second: f64,
}

/// `sup |f(t) - f(s)| / (t - s)^beta` over all grid pairs.
pub fn holder_seminorm(f: &SampledPath, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let t = f.times();
    let v = f.values();
    let mut best: f64 = 0.0;
    for i in 0..v.len() {
        for k in (i + 1)..v.len() {
            best = best.max((v[k] - v[i]).abs() / (t[k] - t[i]).powf(beta));
        }
    }
    Ok(best)
}

/// `||f||_{1,beta} = sup_{s<t} ( |f(t)-f(s)|/(t-s)^beta + int_s^t |f(u)-f(s)|/(u-s)^{1+beta} du )`.
///
/// The supremum runs over grid pairs; the inner integral is exact for the
/// piecewise-linear interpolant.
pub fn besov_w1_norm(f: &SampledPath, beta: f64) -> Result<NormEstimate> {
    check_beta(beta)?;
    let h = uniform_step(f)?;
    let v = f.values();
    let n = v.len() - 1;
    let m = Moments::new(-1.0 - beta, n);
    let pow: Vec<f64> = (0..=n).map(|p| (p as f64).powf(-beta)).collect();
    let hb = h.powf(-beta);
    let mut best = (0.0, 0.0);
    for i in 0..n {
        let fi = v[i];
        let mut acc = 0.0;
        for k in (i + 1)..=n {
            let p = k - i;
            acc += m.abs_cell(v[k - 1] - fi, v[k] - v[k - 1], p);
            let holder = (v[k] - fi).abs() * pow[p];
            if holder + acc > best.0 + best.1 {
                best = (holder, acc);
            }
        }
    }
    let (holder, integral) = (best.0 * hb, best.1 * hb);
    Ok(NormEstimate { value: holder + integral, grid_n: n + 1, first: holder, second: integral })
}

/// `||f||_{2,beta} = int |f(s)|/s^beta ds + int int_{u<s} |f(s)-f(u)|/|s-u|^{1+beta} du ds`.
///
/// The first term and the inner integral are exact for the interpolant; the
/// outer integral of the second term is a trapezoid over the nodes.
pub fn besov_w2_norm(f: &SampledPath, beta: f64) -> Result<NormEstimate> {
    check_beta(beta)?;
    let h = uniform_step(f)?;
    let v = f.values();
    let n = v.len() - 1;

    let mw = Moments::new(-beta, n);
    let mut first = 0.0;
    for j in 0..n {
        first += mw.abs_cell(v[j], v[j + 1] - v[j], j + 1);
    }
    first *= h.powf(1.0 - beta);

    let inner = inner_singular(v, h, beta);
    let mut second = 0.0;
    for k in 0..n {
        second += 0.5 * (inner[k] + inner[k + 1]);
    }
    second *= h;
    Ok(NormEstimate { value: first + second, grid_n: n + 1, first, second })
}

/// `J(t_k) = int_0^{t_k} |f(t_k) - f(u)| / (t_k - u)^{1+beta} du` at every node.
pub(crate) fn inner_singular(v: &[f64], h: f64, beta: f64) -> Vec<f64> {
    let n = v.len() - 1;
    let m = Moments::new(-1.0 - beta, n);
    let hb = h.powf(-beta);
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let fk = v[k];
        let mut s = 0.0;
        for p in 1..=k {
            let hi = v[k - p + 1];
            let lo = v[k - p];
            s += m.abs_cell(fk - hi, hi - lo, p);
        }
        out[k] = s * hb;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::TimeGrid;

    #[test]
    fn constant_has_zero_w1() {
        let g = TimeGrid::uniform(1.0, 32).unwrap();
        let e = besov_w1_norm(&SampledPath::constant(&g, 2.5), 0.5).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn identity_w1_is_three() {
        let g = TimeGrid::uniform(1.0, 256).unwrap();
        let e = besov_w1_norm(&SampledPath::from_fn(&g, "s", |s| s), 0.5).unwrap();
        assert!((e.value - 3.0).abs() < 1e-10, "{e:?}");
        assert!((e.first - 1.0).abs() < 1e-12 && (e.second - 2.0).abs() < 1e-10);
    }

    #[test]
    fn w2_examples() {
        let g = TimeGrid::uniform(1.0, 1024).unwrap();
        assert_eq!(besov_w2_norm(&SampledPath::constant(&g, 0.0), 0.5).unwrap().value, 0.0);
        let one = besov_w2_norm(&SampledPath::constant(&g, 1.0), 0.5).unwrap();
        assert!((one.value - 2.0).abs() < 1e-12);
        let id = besov_w2_norm(&SampledPath::from_fn(&g, "s", |s| s), 0.5).unwrap();
        assert!((id.first - 2.0 / 3.0).abs() < 1e-12);
        // inner J(s) = 2 sqrt(s) is integrated by the trapezoid
        assert!((id.second - 4.0 / 3.0).abs() < 1e-4, "{id:?}");
        assert!((id.value - 2.0).abs() < 1e-4);
    }

    #[test]
    fn sign_changes_are_absolute() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let f = SampledPath::new(g, vec![-1.0, 1.0, -1.0], 0, "zigzag").unwrap();
        let e = besov_w2_norm(&f, 0.5).unwrap();
        let f = |s: f64| if s < 0.5 { -1.0 + 4.0 * s } else { 3.0 - 4.0 * s };
        // s = u^2 removes the weight singularity
        let direct = crate::numeric::integrate(|u| 2.0 * f(u * u).abs(), 0.0, 1.0, 1e-13);
        assert!((e.first - direct).abs() < 1e-9, "{} vs {direct}", e.first);
    }
}
