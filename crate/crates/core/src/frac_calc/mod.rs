//! Fractional integrals, Weyl derivatives and fractional Besov norms on uniform grids.

mod norms;
mod operators;

pub use norms::{besov_w1_norm, besov_w2_norm, holder_seminorm, NormEstimate};

pub(crate) use operators::left_derivative;

use crate::error::{Error, Result};
use crate::path::SampledPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Operators based at the grid start (`0+`).
    Left,
    /// Operators based at the grid end (`t-`), with the real-valued convention.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    beta: f64,
    side: Side,
}

impl FracOrder {
    pub fn new(beta: f64, side: Side) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self { beta, side })
    }

    pub fn left(beta: f64) -> Result<Self> {
        Self::new(beta, Side::Left)
    }

    pub fn right(beta: f64) -> Result<Self> {
        Self::new(beta, Side::Right)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn side(&self) -> Side {
        self.side
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must be in (0, 1), got {beta}")))
    }
}

pub(crate) fn uniform_step(f: &SampledPath) -> Result<f64> {
    f.grid().uniform_step().ok_or_else(|| Error::InvalidGrid("fractional operators need a uniform grid".into()))
}

fn apply(f: &SampledPath, order: FracOrder, op: fn(&[f64], f64, f64) -> Vec<f64>) -> Result<SampledPath> {
    let h = uniform_step(f)?;
    let out = match order.side {
        Side::Left => op(f.values(), h, order.beta),
        Side::Right => {
            let rev: Vec<f64> = f.values().iter().rev().copied().collect();
            let mut v = op(&rev, h, order.beta);
            v.reverse();
            v
        }
    };
    SampledPath::new(f.grid().clone(), out, f.seed(), f.label())
}

/// `I^beta f` of the piecewise-linear interpolant, exact per cell.
pub fn frac_integral(f: &SampledPath, order: FracOrder) -> Result<SampledPath> {
    apply(f, order, operators::left_integral)
}

/// Weyl-representation derivative `D^beta f` of the piecewise-linear interpolant.
///
/// At the base point the value is 0 if `f` vanishes there and infinite otherwise.
pub fn frac_derivative(f: &SampledPath, order: FracOrder) -> Result<SampledPath> {
    apply(f, order, operators::left_derivative)
}
