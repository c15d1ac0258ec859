//! Linear combinations of convex functions in the form
//! `f(x) = slope * x + intercept + sum_i w_i |x - a_i| + int rho(a) |x - a| da`.
//!
//! The weights `w_i` and the density `rho` are half the curvature measure:
//! `f'' = 2 sum_i w_i delta_{a_i} + 2 rho`. A call `(x - K)^+` is
//! `x/2 - K/2 + |x - K|/2`, i.e. a single atom of weight 1/2.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;

/// `sgn` with `sgn(0) = -1`, so that derivatives are left-continuous.
pub fn sgn_left(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Piecewise-constant density on `breaks[0] < ... < breaks[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidParameter("density needs one value per segment".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("density breakpoints must increase and values be finite".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, a: f64) -> f64 {
        if a < self.breaks[0] || a >= self.breaks[self.breaks.len() - 1] {
            return 0.0;
        }
        let i = self.breaks.partition_point(|&b| b <= a) - 1;
        self.values[i]
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breaks.windows(2).zip(&self.values).map(|(b, &v)| (b[0], b[1], v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCombination {
    slope: f64,
    intercept: f64,
    atoms: Vec<Atom>,
    density: Option<PiecewiseDensity>,
}

impl ConvexCombination {
    pub fn new(slope: f64, intercept: f64, mut atoms: Vec<Atom>, density: Option<PiecewiseDensity>) -> Result<Self> {
        if !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::InvalidParameter("slope and intercept must be finite".into()));
        }
        if atoms.iter().any(|a| !a.location.is_finite() || !a.weight.is_finite()) {
            return Err(Error::InvalidParameter("atoms must be finite".into()));
        }
        atoms.retain(|a| a.weight != 0.0);
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Self { slope, intercept, atoms, density })
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept, atoms: Vec::new(), density: None }
    }

    /// `(x - k)^+`.
    pub fn call(k: f64) -> Self {
        Self { slope: 0.5, intercept: -0.5 * k, atoms: vec![Atom { location: k, weight: 0.5 }], density: None }
    }

    /// `(k - x)^+`.
    pub fn put(k: f64) -> Self {
        Self { slope: -0.5, intercept: 0.5 * k, atoms: vec![Atom { location: k, weight: 0.5 }], density: None }
    }

    /// `|x - a|`.
    pub fn abs(a: f64) -> Self {
        Self { slope: 0.0, intercept: 0.0, atoms: vec![Atom { location: a, weight: 1.0 }], density: None }
    }

    /// Quadratic `c x^2` restricted to curvature on `[lo, hi]`, i.e. density `c` there.
    pub fn with_density(density: PiecewiseDensity) -> Self {
        Self { slope: 0.0, intercept: 0.0, atoms: Vec::new(), density: Some(density) }
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Atoms of `f''/2`.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Density of `f''/2`.
    pub fn density(&self) -> Option<&PiecewiseDensity> {
        self.density.as_ref()
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self {
            slope: w * self.slope,
            intercept: w * self.intercept,
            atoms: self.atoms.iter().map(|a| Atom { location: a.location, weight: w * a.weight }).collect(),
            density: self.density.as_ref().map(|d| PiecewiseDensity {
                breaks: d.breaks.clone(),
                values: d.values.iter().map(|v| w * v).collect(),
            }),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            match atoms.iter_mut().find(|b| b.location == a.location) {
                Some(b) => b.weight += a.weight,
                None => atoms.push(*a),
            }
        }
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(d1), Some(d2)) => {
                let mut breaks: Vec<f64> = d1.breaks.iter().chain(&d2.breaks).copied().collect();
                breaks.sort_by(|a, b| a.total_cmp(b));
                breaks.dedup();
                let values = breaks.windows(2).map(|w| {
                    let m = 0.5 * (w[0] + w[1]);
                    d1.at(m) + d2.at(m)
                });
                let values = values.collect();
                Some(PiecewiseDensity::new(breaks, values)?)
            }
        };
        Self::new(self.slope + other.slope, self.intercept + other.intercept, atoms, density)
    }

    /// Nonnegative curvature everywhere.
    pub fn is_convex(&self) -> bool {
        self.atoms.iter().all(|a| a.weight >= 0.0)
            && self.density.as_ref().is_none_or(|d| d.values.iter().all(|&v| v >= 0.0))
    }

    pub fn has_curvature(&self) -> bool {
        !self.atoms.is_empty() || self.density.as_ref().is_some_and(|d| d.values.iter().any(|&v| v != 0.0))
    }

    /// Total variation of `f''`.
    pub fn curvature_variation(&self) -> f64 {
        2.0 * (self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |d| d.segments().map(|(a, b, v)| (b - a) * v.abs()).sum()))
    }

    /// Points where `f` fails to be smooth: atoms and density breakpoints.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.atoms.iter().map(|a| a.location).collect();
        if let Some(d) = &self.density {
            k.extend(&d.breaks);
        }
        k.sort_by(|a, b| a.total_cmp(b));
        k.dedup();
        k
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.slope * x + self.intercept;
        for a in &self.atoms {
            v += a.weight * (x - a.location).abs();
        }
        if let Some(d) = &self.density {
            for (lo, hi, r) in d.segments() {
                let s = if x <= lo {
                    0.5 * ((hi - x).powi(2) - (lo - x).powi(2))
                } else if x >= hi {
                    0.5 * ((x - lo).powi(2) - (x - hi).powi(2))
                } else {
                    0.5 * ((x - lo).powi(2) + (hi - x).powi(2))
                };
                v += r * s;
            }
        }
        v
    }

    /// `f'_-(x) = slope + int sgn(x - a) f''(da) / 2` with `sgn(0) = -1`.
    pub fn left_derivative(&self, x: f64) -> f64 {
        let mut v = self.slope;
        for a in &self.atoms {
            v += a.weight * sgn_left(x - a.location);
        }
        if let Some(d) = &self.density {
            for (lo, hi, r) in d.segments() {
                let below = (x.min(hi) - lo).max(0.0);
                let above = (hi - x.max(lo)).max(0.0);
                v += r * (below - above);
            }
        }
        v
    }

    pub fn eval_and_left_derivative(&self, x: f64) -> (f64, f64) {
        (self.eval(x), self.left_derivative(x))
    }

    /// `f_n(x) = n int_{-inf}^0 f(x + y) j(n y) dy`.
    pub fn mollify(&self, n: u32) -> Result<MollifiedMember> {
        if n == 0 {
            return Err(Error::InvalidParameter("mollifier index must be at least 1".into()));
        }
        Ok(MollifiedMember { base: self.clone(), n, kinks: self.kinks() })
    }
}

impl fmt::Display for ConvexCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{:+}", self.slope, self.intercept)?;
        for a in &self.atoms {
            write!(f, "{:+}|x-{}|", a.weight, a.location)?;
        }
        if self.density.is_some() {
            write!(f, "+density")?;
        }
        Ok(())
    }
}

/// A twice continuously differentiable function with known derivatives.
pub trait C2Function: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Closure-backed `C2Function`.
#[derive(Clone)]
pub struct SmoothFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SmoothFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), df: Arc::new(df), d2f: Arc::new(d2f) }
    }

    pub fn square() -> Self {
        Self::new(|x| x * x, |x| 2.0 * x, |_| 2.0)
    }
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothFn")
    }
}

impl C2Function for SmoothFn {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (self.df)(x)
    }
    fn d2(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }
}

/// Smooth bump `30 z^2 (1 + z)^2` on `[-1, 0]`, unit mass.
pub fn bump(z: f64) -> f64 {
    if (-1.0..=0.0).contains(&z) {
        30.0 * z * z * (1.0 + z).powi(2)
    } else {
        0.0
    }
}

static GL4: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

/// Member `f_n` of the mollified family; evaluated exactly by Gauss-Legendre
/// on the pieces of `[-1, 0]` where the base function is polynomial.
#[derive(Debug, Clone)]
pub struct MollifiedMember {
    base: ConvexCombination,
    n: u32,
    kinks: Vec<f64>,
}

impl MollifiedMember {
    pub fn index(&self) -> u32 {
        self.n
    }

    pub fn base(&self) -> &ConvexCombination {
        &self.base
    }

    fn smooth_pieces(&self, x: f64) -> Vec<f64> {
        let n = self.n as f64;
        let mut cuts = vec![-1.0];
        for &k in &self.kinks {
            let z = n * (k - x);
            if z > -1.0 && z < 0.0 {
                cuts.push(z);
            }
        }
        cuts.push(0.0);
        cuts
    }

    fn convolve(&self, x: f64, g: impl Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = GL4.get_or_init(|| gauss_legendre(4));
        let n = self.n as f64;
        let cuts = self.smooth_pieces(x);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            for (t, wt) in nodes.iter().zip(weights) {
                let z = a + half * (t + 1.0);
                total += wt * half * g(x + z / n) * bump(z);
            }
        }
        total
    }
}

impl C2Function for MollifiedMember {
    fn value(&self, x: f64) -> f64 {
        self.convolve(x, |y| self.base.eval(y))
    }

    fn d1(&self, x: f64) -> f64 {
        self.convolve(x, |y| self.base.left_derivative(y))
    }

    fn d2(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let mut v: f64 = self.base.atoms.iter().map(|a| 2.0 * a.weight * n * bump(n * (a.location - x))).sum();
        if let Some(d) = &self.base.density {
            v += 2.0 * self.convolve(x, |y| d.at(y));
        }
        v
    }
}

/// Strictly monotone `C^2` map with an inverse.
#[derive(Clone)]
pub enum MonotoneMap {
    Identity,
    Exp,
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        d2f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        /// Range of arguments where the map is used and inverted.
        domain: (f64, f64),
    },
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("Identity"),
            Self::Exp => f.write_str("Exp"),
            Self::Custom { domain, .. } => write!(f, "Custom{domain:?}"),
        }
    }
}

impl MonotoneMap {
    /// Checks strict monotonicity on 1025 probes of the domain.
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self> {
        if !(domain.1 > domain.0) {
            return Err(Error::InvalidParameter("empty domain".into()));
        }
        let probes = 1024;
        let ys: Vec<f64> =
            (0..=probes).map(|i| f(domain.0 + (domain.1 - domain.0) * i as f64 / probes as f64)).collect();
        let up = ys.windows(2).all(|w| w[1] > w[0]);
        let down = ys.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::NotMonotone(format!("values are not strictly monotone on {domain:?}")));
        }
        Ok(Self::Custom { f: Arc::new(f), df: Arc::new(df), d2f: Arc::new(d2f), domain })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Exp => x.exp(),
            Self::Custom { f, .. } => f(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Exp => x.exp(),
            Self::Custom { df, .. } => df(x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            Self::Identity => 0.0,
            Self::Exp => x.exp(),
            Self::Custom { d2f, .. } => d2f(x),
        }
    }

    pub fn is_increasing(&self) -> bool {
        match self {
            Self::Identity | Self::Exp => true,
            Self::Custom { f, domain, .. } => f(domain.1) > f(domain.0),
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        match self {
            Self::Identity => Ok(y),
            Self::Exp if y > 0.0 => Ok(y.ln()),
            Self::Exp => Err(Error::InvalidParameter(format!("{y} is outside the range of exp"))),
            Self::Custom { f, domain, .. } => {
                let (mut lo, mut hi) = *domain;
                let (flo, fhi) = (f(lo), f(hi));
                let inc = fhi > flo;
                if !((flo.min(fhi)..=flo.max(fhi)).contains(&y)) {
                    return Err(Error::InvalidParameter(format!("{y} is outside the range of the map on {domain:?}")));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) < y) == inc {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Rejects paths whose values leave the domain of a custom map.
    pub fn check_range(&self, lo: f64, hi: f64) -> Result<()> {
        match self {
            Self::Custom { domain, .. } if lo < domain.0 || hi > domain.1 => {
                Err(Error::NotMonotone(format!("path range [{lo}, {hi}] leaves the monotone domain {domain:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// A curvature atom of `f` at level `a` seen through `S = g(X)`: the preimage `g^{-1}(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedAtom {
    pub level: f64,
    pub preimage: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushedCurvature {
    pub atoms: Vec<MappedAtom>,
    /// Density breakpoints and their preimages.
    pub density_breaks: Vec<(f64, f64)>,
    pub increasing: bool,
}

/// Maps the curvature of `f` to the `X`-levels of `S = g(X)`, `a -> g^{-1}(a)`.
pub fn curvature_pushforward(f: &ConvexCombination, g: &MonotoneMap) -> Result<PushedCurvature> {
    let atoms = f
        .atoms()
        .iter()
        .map(|a| Ok(MappedAtom { level: a.location, preimage: g.inverse(a.location)?, weight: a.weight }))
        .collect::<Result<Vec<_>>>()?;
    let density_breaks = match f.density() {
        Some(d) => d.breaks().iter().map(|&b| Ok((b, g.inverse(b)?))).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(PushedCurvature { atoms, density_breaks, increasing: g.is_increasing() })
}

/// Parses `call(K)`, `put(K)`, `abs(a)` and `lincomb(w1*call(K1)+w2*put(K2)-...)`.
pub fn parse_payoff(input: &str) -> Result<ConvexCombination> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let err = |reason: &str| Error::Parse { input: input.to_string(), reason: reason.to_string() };
    if let Some(inner) = s.strip_prefix("lincomb(").and_then(|r| r.strip_suffix(')')) {
        let mut p = Parser { s: inner.as_bytes(), pos: 0 };
        let mut acc: Option<ConvexCombination> = None;
        loop {
            let sign = match p.peek() {
                Some(b'+') => {
                    p.pos += 1;
                    1.0
                }
                Some(b'-') => {
                    p.pos += 1;
                    -1.0
                }
                None if acc.is_some() => break,
                None => return Err(err("empty combination")),
                _ if acc.is_none() => 1.0,
                Some(c) => return Err(err(&format!("expected + or -, found `{}`", c as char))),
            };
            let weight = if p.peek().is_some_and(|c| c.is_ascii_digit() || c == b'.') {
                let w = p.number().ok_or_else(|| err("bad weight"))?;
                if p.peek() != Some(b'*') {
                    return Err(err("expected `*` after weight"));
                }
                p.pos += 1;
                w
            } else {
                1.0
            };
            let term = p.atom().map_err(|r| err(&r))?;
            let term = term.scaled(sign * weight);
            acc = Some(match acc {
                None => term,
                Some(a) => a.plus(&term)?,
            });
        }
        return acc.ok_or_else(|| err("empty combination"));
    }
    let mut p = Parser { s: s.as_bytes(), pos: 0 };
    let f = p.atom().map_err(|r| err(&r))?;
    if p.pos != s.len() {
        return Err(err("trailing characters"));
    }
    Ok(f)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'+' | b'-')) {
            self.pos += 1;
        }
        while let Some(c) = self.peek() {
            let exp_sign = matches!(c, b'+' | b'-') && matches!(self.s.get(self.pos - 1), Some(b'e' | b'E'));
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }

    fn atom(&mut self) -> std::result::Result<ConvexCombination, String> {
        let rest = &self.s[self.pos..];
        let (name, ctor): (&str, fn(f64) -> ConvexCombination) = if rest.starts_with(b"call(") {
            ("call(", ConvexCombination::call)
        } else if rest.starts_with(b"put(") {
            ("put(", ConvexCombination::put)
        } else if rest.starts_with(b"abs(") {
            ("abs(", ConvexCombination::abs)
        } else {
            return Err("expected call(..), put(..) or abs(..)".into());
        };
        self.pos += name.len();
        let k = self.number().ok_or("bad number")?;
        if !k.is_finite() {
            return Err("level must be finite".into());
        }
        if self.peek() != Some(b')') {
            return Err("expected `)`".into());
        }
        self.pos += 1;
        Ok(ctor(k))
    }
}
