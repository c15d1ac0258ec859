//! Riemann-Liouville integrals and Weyl derivatives of piecewise-linear data.
//!
//! On a uniform grid with step `h`, a cell at distance `p` from the evaluation
//! point covers `x = v / h` in `[p - 1, p]`. Against a linear function of
//! `y = x - (p - 1)` every cell integral reduces to the two moments
//! `M0(g, p) = int x^g dx` and `M1(g, p) = int (x - p + 1) x^g dx` over that cell.

use std::sync::OnceLock;

use crate::numeric::{gamma, gauss_legendre};

static GL16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

pub(crate) fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    GL16.get_or_init(|| gauss_legendre(16))
}

/// `(p^e - (p-1)^e) / e` without cancellation, `p >= 2`.
fn power_difference(e: f64, p: f64) -> f64 {
    p.powf(e) * -(e * (-1.0 / p).ln_1p()).exp_m1() / e
}

/// Cell moments of `x^g` for cells `p = 1..=n` (index 0 unused).
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub g: f64,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
}

impl Moments {
    pub fn new(g: f64, n: usize) -> Self {
        let mut m0 = vec![0.0; n + 1];
        let mut m1 = vec![0.0; n + 1];
        if n >= 1 {
            m0[1] = if g + 1.0 > 0.0 { 1.0 / (g + 1.0) } else { f64::INFINITY };
            m1[1] = 1.0 / (g + 2.0);
        }
        let (x, w) = gl16();
        for p in 2..=n {
            let pf = p as f64;
            m0[p] = power_difference(g + 1.0, pf);
            m1[p] = if p < 32 {
                power_difference(g + 2.0, pf) - (pf - 1.0) * m0[p]
            } else {
                x.iter()
                    .zip(w)
                    .map(|(&xi, &wi)| {
                        let y = 0.5 * (xi + 1.0);
                        0.5 * wi * y * (pf - 1.0 + y).powf(g)
                    })
                    .sum()
            };
        }
        Self { g, m0, m1 }
    }

    /// `int_{y0}^{y1} (c + d y) (p - 1 + y)^g dy` for a sub-piece of cell `p`.
    pub fn piece(&self, c: f64, d: f64, p: usize, y0: f64, y1: f64) -> f64 {
        let q = (p - 1) as f64;
        let g = self.g;
        if p == 1 {
            // closed form around the origin; g + 1 > 0 is required by callers here
            let a = |y: f64| {
                if y == 0.0 {
                    0.0
                } else {
                    c * y.powf(g + 1.0) / (g + 1.0) + d * y.powf(g + 2.0) / (g + 2.0)
                }
            };
            return a(y1) - a(y0);
        }
        let (x, w) = gl16();
        let half = 0.5 * (y1 - y0);
        x.iter()
            .zip(w)
            .map(|(&xi, &wi)| {
                let y = y0 + half * (xi + 1.0);
                wi * (c + d * y) * (q + y).powf(g)
            })
            .sum::<f64>()
            * half
    }

    /// `int_0^1 |c + d y| (p - 1 + y)^g dy`, splitting at the root when the sign changes.
    pub fn abs_cell(&self, c: f64, d: f64, p: usize) -> f64 {
        let e = c + d;
        if c * e >= 0.0 {
            let v = if p == 1 {
                if c == 0.0 {
                    d * self.m1[1]
                } else {
                    c * self.m0[1] + d * self.m1[1]
                }
            } else {
                c * self.m0[p] + d * self.m1[p]
            };
            return v.abs();
        }
        let r = -c / d;
        self.piece(c, d, p, 0.0, r).abs() + self.piece(c, d, p, r, 1.0).abs()
    }
}

/// `I^beta_{a+} f` at every node of a uniform grid starting at `a`.
pub(crate) fn left_integral(f: &[f64], h: f64, beta: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let m = Moments::new(beta - 1.0, n);
    let scale = h.powf(beta) / gamma(beta);
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let mut s = 0.0;
        for p in 1..=k {
            let hi = f[k - p + 1];
            let lo = f[k - p];
            s += hi * m.m0[p] + (lo - hi) * m.m1[p];
        }
        out[k] = scale * s;
    }
    out
}

/// Weyl representation of `D^beta_{a+} f` at every node. At the origin the
/// value is 0 when `f(a) = 0` and `+-inf` otherwise.
pub(crate) fn left_derivative(f: &[f64], h: f64, beta: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let m = Moments::new(-1.0 - beta, n);
    let g1 = gamma(1.0 - beta);
    let hb = h.powf(-beta);
    let mut out = vec![0.0; n + 1];
    out[0] = if f[0] == 0.0 { 0.0 } else { f[0].signum() * f64::INFINITY };
    for k in 1..=n {
        let fk = f[k];
        let mut s = (fk - f[k - 1]) / (1.0 - beta);
        for p in 2..=k {
            let hi = f[k - p + 1];
            let lo = f[k - p];
            s += (fk - hi) * m.m0[p] - (lo - hi) * m.m1[p];
        }
        out[k] = (fk * (k as f64 * h).powf(-beta) + beta * hb * s) / g1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct_integration() {
        for g in [-1.7, -1.25, -0.5, -0.3, 0.4] {
            let m = Moments::new(g, 100);
            for p in [2usize, 3, 31, 32, 33, 100] {
                let direct = crate::numeric::integrate(|x| x.powf(g), (p - 1) as f64, p as f64, 1e-15);
                assert!((m.m0[p] - direct).abs() < 1e-13 * direct.abs().max(1e-3), "g={g} p={p}");
                let d1 =
                    crate::numeric::integrate(|x| (x - (p - 1) as f64) * x.powf(g), (p - 1) as f64, p as f64, 1e-16);
                assert!((m.m1[p] - d1).abs() < 1e-11 * d1.abs(), "g={g} p={p}: {} vs {d1}", m.m1[p]);
            }
        }
    }

    #[test]
    fn abs_cell_splits_at_root() {
        let m = Moments::new(-0.5, 10);
        let direct = crate::numeric::integrate(|y| (-0.3 + y).abs() * (4.0 + y).powf(-0.5), 0.0, 1.0, 1e-14);
        assert!((m.abs_cell(-0.3, 1.0, 5) - direct).abs() < 1e-12);
        let direct = crate::numeric::integrate(|u| 2.0 * (0.2 - u * u).abs(), 0.0, 1.0, 1e-14);
        assert!((m.abs_cell(0.2, -1.0, 1) - direct).abs() < 1e-12);
    }
}
