//! Stop-loss start-gain hedging of a call on `S = S_0 exp(int mu + Y - <Y>/2)`,
//! the cost of limit-order cutouts, and the replication identity
//! `(S_T - K)^+ = (S_0 - K)^+ + int 1{S >= K} dS + L_T^K(S) / 2`.

use crate::error::{Error, Result};
use crate::integrators::{rs_forward_sum, Partition};
use crate::local_time::{default_epsilon, local_time_at};
use crate::path::{BracketPath, SampledPath};
use crate::tanaka::{realized_clock, restrict, LocalTimeConfig};

/// A positive price path with the inputs it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub s: SampledPath,
    pub y: SampledPath,
    pub bracket: BracketPath,
    /// `int_0^t mu(u) du` at every grid time.
    pub drift: Vec<f64>,
    pub s0: f64,
}

impl PricePath {
    /// Largest relative deviation of `S` from the exponential formula.
    pub fn rebuild_error(&self) -> f64 {
        let y0 = self.y.first();
        self.s
            .values()
            .iter()
            .zip(self.y.values())
            .zip(self.bracket.values())
            .zip(&self.drift)
            .map(|(((&s, &y), &b), &d)| {
                let e = self.s0 * (d + y - y0 - 0.5 * b).exp();
                ((s - e) / e).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `S_t = S_0 exp(int_0^t mu + Y_t - Y_0 - <Y>_t / 2)`, drift by the trapezoid rule.
pub fn price_path(y: &SampledPath, bracket: &BracketPath, mu: impl Fn(f64) -> f64, s0: f64) -> Result<PricePath> {
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::InvalidParameter(format!("initial price must be positive, got {s0}")));
    }
    if !y.grid().same_as(bracket.grid()) {
        return Err(Error::GridMismatch);
    }
    let t = y.times();
    let mut drift = vec![0.0; t.len()];
    let mut prev = mu(t[0]);
    for k in 1..t.len() {
        let cur = mu(t[k]);
        drift[k] = drift[k - 1] + 0.5 * (prev + cur) * (t[k] - t[k - 1]);
        prev = cur;
    }
    let y0 = y.first();
    let values: Vec<f64> = y
        .values()
        .iter()
        .zip(bracket.values())
        .zip(&drift)
        .map(|((&yv, &b), &d)| s0 * (d + yv - y0 - 0.5 * b).exp())
        .collect();
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Numerical("price path overflowed".into()));
    }
    let s = SampledPath::new(y.grid().clone(), values, y.seed(), format!("price({})", y.label()))?;
    Ok(PricePath { s, y: y.clone(), bracket: bracket.clone(), drift, s0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeSide {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub time: f64,
    pub side: TradeSide,
    pub price: f64,
}

/// Holdings of the strategy `1{S >= K}` at the partition times.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeLedger {
    pub times: Vec<f64>,
    /// Shares held after rebalancing at each time, 0 or 1.
    pub positions: Vec<f64>,
    /// Cash after rebalancing at each time.
    pub cash: Vec<f64>,
    pub trades: Vec<Trade>,
    /// `(S_0 - K)^+`.
    pub initial_cost: f64,
    /// `sum 1{S_{t_{j-1}} >= K} (S_{t_j} - S_{t_{j-1}})`.
    pub gains: f64,
    pub terminal_wealth: f64,
    pub payoff: f64,
}

impl HedgeLedger {
    /// Largest violation of the self-financing rule: cash changes only by trade value.
    pub fn self_financing_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut trades = self.trades.iter().peekable();
        for j in 1..self.times.len() {
            let mut flow = 0.0;
            while let Some(tr) = trades.peek() {
                if tr.time > self.times[j] {
                    break;
                }
                if tr.time > self.times[j - 1] {
                    flow += match tr.side {
                        TradeSide::Buy => -tr.price,
                        TradeSide::Sell => tr.price,
                    };
                }
                trades.next();
            }
            worst = worst.max((self.cash[j] - self.cash[j - 1] - flow).abs());
        }
        worst
    }

    pub fn shortfall(&self) -> f64 {
        self.payoff - self.terminal_wealth
    }
}

fn indicator(s: &SampledPath, k: f64) -> SampledPath {
    s.map(|v| if v >= k { 1.0 } else { 0.0 })
}

/// Holds one share whenever `S >= K` at a partition time. Starting in the
/// money, the share is bought at `S_0` with capital `S_0 - K` and `K` borrowed.
pub fn stop_loss_pnl(price: &PricePath, k: f64, partition: &Partition) -> Result<HedgeLedger> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("strike must be positive, got {k}")));
    }
    let s = &price.s;
    let gains = rs_forward_sum(&indicator(s, k), s, partition)?;
    let idx = partition.indices_on(s.grid())?;
    let v = s.values();
    let times: Vec<f64> = idx.iter().map(|&i| s.times()[i]).collect();
    let initial_cost = (v[idx[0]] - k).max(0.0);
    let mut positions = Vec::with_capacity(idx.len());
    let mut cash = Vec::with_capacity(idx.len());
    let mut trades = Vec::new();
    let mut pos = 0.0;
    let mut c = initial_cost;
    for (j, &i) in idx.iter().enumerate() {
        let want = if v[i] >= k { 1.0 } else { 0.0 };
        if want != pos {
            let side = if want > pos { TradeSide::Buy } else { TradeSide::Sell };
            c += match side {
                TradeSide::Buy => -v[i],
                TradeSide::Sell => v[i],
            };
            trades.push(Trade { time: times[j], side, price: v[i] });
            pos = want;
        }
        positions.push(pos);
        cash.push(c);
    }
    let last = v[idx[idx.len() - 1]];
    Ok(HedgeLedger {
        times,
        positions,
        cash,
        trades,
        initial_cost,
        gains,
        terminal_wealth: c + pos * last,
        payoff: (last - k).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoutReport {
    pub total: f64,
    pub round_trips: usize,
}

/// Round trips bought at `K` and sold at `K - eps`, detected at grid points.
/// Starting strictly above `K` the first sale does not complete a round trip.
pub fn cutout_costs(price: &PricePath, k: f64, eps: f64) -> Result<CutoutReport> {
    if !(eps > 0.0 && eps < k) {
        return Err(Error::InvalidParameter(format!("need 0 < eps < K, got eps = {eps}, K = {k}")));
    }
    let v = price.s.values();
    let mut holding = v[0] >= k;
    let mut bought_at_k = v[0] == k;
    let mut round_trips = 0;
    for &x in &v[1..] {
        if !holding && x >= k {
            holding = true;
            bought_at_k = true;
        } else if holding && x <= k - eps {
            holding = false;
            if bought_at_k {
                round_trips += 1;
            }
        }
    }
    Ok(CutoutReport { total: eps * round_trips as f64, round_trips })
}

/// Reference cutout width `16 K rms(d ln S)`, the size of sixteen typical price steps at the strike.
pub fn base_cutout_width(price: &PricePath, k: f64) -> f64 {
    let v = price.s.values();
    let ss: f64 = v.windows(2).map(|w| (w[1] / w[0]).ln().powi(2)).sum();
    16.0 * k * (ss / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationReport {
    pub payoff: f64,
    pub initial: f64,
    pub gains: f64,
    /// `payoff - initial - gains - half_local_time`.
    pub residual: f64,
    /// `L_T^K(S) / 2`, with the clock the realized quadratic variation of `S`.
    pub half_local_time: f64,
    pub epsilon: f64,
}

impl ReplicationReport {
    pub fn shortfall(&self) -> f64 {
        self.payoff - self.initial - self.gains
    }
}

pub fn replication_report(
    price: &PricePath,
    k: f64,
    partition: &Partition,
    lt: &LocalTimeConfig,
) -> Result<ReplicationReport> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("strike must be positive, got {k}")));
    }
    let s = restrict(&price.s, partition)?;
    let full = Partition::from_grid(s.grid());
    let gains = rs_forward_sum(&indicator(&s, k), &s, &full)?;
    let epsilon = lt.epsilon.unwrap_or_else(|| default_epsilon(&s));
    let half_local_time = if price.bracket.is_zero() {
        0.0
    } else {
        let clock = realized_clock(&s)?;
        0.5 * local_time_at(&s, &clock, k, epsilon, lt.rule)?
    };
    let payoff = (s.last() - k).max(0.0);
    let initial = (s.first() - k).max(0.0);
    Ok(ReplicationReport {
        payoff,
        initial,
        gains,
        residual: payoff - initial - gains - half_local_time,
        half_local_time,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::TimeGrid;

    fn price(values: &[f64]) -> PricePath {
        let g = TimeGrid::uniform(1.0, values.len() - 1).unwrap();
        let y = SampledPath::new(g.clone(), values.iter().map(|v| (v / values[0]).ln()).collect(), 0, "y").unwrap();
        price_path(&y, &BracketPath::zero(&g), |_| 0.0, values[0]).unwrap()
    }

    #[test]
    fn flat_inputs_give_flat_price() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let p = price_path(&SampledPath::constant(&g, 0.0), &BracketPath::zero(&g), |_| 0.0, 3.0).unwrap();
        assert!(p.s.values().iter().all(|&v| v == 3.0));
        assert!(price_path(&SampledPath::constant(&g, 0.0), &BracketPath::zero(&g), |_| 0.0, 0.0).is_err());
    }

    #[test]
    fn drift_and_bracket_enter_the_exponent() {
        let g = TimeGrid::uniform(2.0, 64).unwrap();
        let y = SampledPath::from_fn(&g, "y", |t| (3.0 * t).sin());
        let b = BracketPath::from_fn(&g, |t| 0.3 * t).unwrap();
        let p = price_path(&y, &b, |t| 0.1 + t, 2.0).unwrap();
        let expect = 2.0 * (0.1 * 2.0 + 2.0 + (6.0f64).sin() - 0.3).exp();
        assert!((p.s.last() - expect).abs() < 1e-12 * expect);
        assert!(p.rebuild_error() < 1e-12);
    }

    #[test]
    fn base_width_scales_with_increments() {
        let p = price(&[1.0, 1.1, 1.0, 1.1, 1.0]);
        let w = 16.0 * 2.0 * 1.1f64.ln();
        assert!((base_cutout_width(&p, 2.0) - w).abs() < 1e-12);
    }

    #[test]
    fn out_of_the_money_path_never_trades() {
        let p = price(&[1.0, 1.1, 0.9, 1.2, 1.0]);
        let part = Partition::from_grid(p.s.grid());
        let l = stop_loss_pnl(&p, 2.0, &part).unwrap();
        assert!(l.trades.is_empty());
        assert_eq!((l.terminal_wealth, l.payoff, l.gains), (0.0, 0.0, 0.0));
        assert_eq!(cutout_costs(&p, 2.0, 0.1).unwrap().round_trips, 0);
    }

    #[test]
    fn ledger_matches_forward_sum() {
        let p = price(&[1.0, 1.3, 0.8, 1.25, 0.7, 1.4]);
        let part = Partition::from_grid(p.s.grid());
        let l = stop_loss_pnl(&p, 1.2, &part).unwrap();
        assert_eq!(l.trades.len(), 5);
        assert!((l.terminal_wealth - (l.initial_cost + l.gains)).abs() < 1e-14);
        assert!(l.self_financing_error() < 1e-15);
        // each round trip buys above K and sells below it; the last buy overpays S - K
        assert!((l.shortfall() - ((1.3 - 0.8) + (1.25 - 0.7) + (1.4 - 1.2))).abs() < 1e-14);
    }

    #[test]
    fn in_the_money_start_is_funded_at_s0() {
        let p = price(&[1.5, 1.6, 1.7]);
        let l = stop_loss_pnl(&p, 1.0, &Partition::from_grid(p.s.grid())).unwrap();
        assert!((l.initial_cost - 0.5).abs() < 1e-15);
        assert!((l.cash[0] + 1.0).abs() < 1e-15);
        assert!((l.terminal_wealth - l.payoff).abs() < 1e-14);
    }

    #[test]
    fn cutouts_count_round_trips() {
        let p = price(&[1.0, 1.05, 0.88, 1.0, 0.95, 0.89, 1.2]);
        let c = cutout_costs(&p, 1.0, 0.1).unwrap();
        // buy at t0 (S = K), sell at 0.88; buy at 1.0, sell at 0.89; final buy is open
        assert_eq!(c.round_trips, 2);
        assert!((c.total - 0.2).abs() < 1e-15);
        let mono = price(&[0.8, 0.9, 1.0, 1.1, 1.2]);
        assert_eq!(cutout_costs(&mono, 1.0, 0.05).unwrap().total, 0.0);
        assert!(cutout_costs(&mono, 1.0, 1.5).is_err());
    }

    #[test]
    fn zero_bracket_has_no_local_time() {
        let p = price(&[1.0, 1.05, 0.97, 1.02, 0.99]);
        let r = replication_report(&p, 1.0, &Partition::from_grid(p.s.grid()), &LocalTimeConfig::default()).unwrap();
        assert_eq!(r.half_local_time, 0.0);
        assert!((r.residual - r.shortfall()).abs() < 1e-15);
    }
}
