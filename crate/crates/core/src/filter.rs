//! Chebyshev filter polynomials for kernel projection and kernel reflection.
//!
//! With `u(x) = (1 + Δ̃² − 2x²)/(1 − Δ̃²)` and `T = T_l(u(0))`:
//!
//! * projection filter `F(x) = T_l(u(x)) / T`, which is 1 at the origin and
//!   bounded by `1/T` on `[Δ̃, 1]`;
//! * reflection filter `K(x) = (2F(x) − 1 + F(Δ̃)) / (1 + F(Δ̃))`, which is 1 at
//!   the origin and within `4/(T+1)` of −1 on `[Δ̃, 1]`.
//!
//! Both are even polynomials of degree `2l` in `x`. Evaluation goes through
//! `cos`/`cosh` forms and switches to a log-space ratio once the hyperbolic
//! arguments get large, so orders in the tens of thousands are safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hyperbolic argument above which ratios of `cosh` are taken in log space.
const LOG_SPACE_SWITCH: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    /// Kernel projection (`F`).
    Projection,
    /// Kernel reflection (`K`).
    Reflection,
}

/// Which value stands in for `F(Δ̃)` inside `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeValue {
    /// The true filter value `1/T_l(u(0))`.
    #[default]
    Exact,
    /// The nominal accuracy `η`, an upper bound on the true value.
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec<T> {
    pub kind: FilterKind,
    /// Filter width `Δ̃` (set to `1/κ` by the solver pipelines).
    pub delta_tilde: T,
    pub eta: T,
    pub order: usize,
    pub order_overridden: bool,
    pub edge: EdgeValue,
}

/// `⌈ln(2/η) / (2Δ̃)⌉`, at least 1.
pub fn order_for<T: Real>(delta_tilde: T, eta: T) -> Result<usize> {
    check_width(delta_tilde)?;
    check_eta(eta)?;
    let v = (T::lit(2.0) / eta).ln() / (T::lit(2.0) * delta_tilde);
    let v = v.to_f64_lossy();
    // Values within rounding noise of an integer are not bumped up by ceil.
    let r = v.round();
    let l = if (v - r).abs() <= 1e-12 * v.max(1.0) { r } else { v.ceil() };
    if !(l.is_finite() && l < usize::MAX as f64) {
        return Err(Error::domain("filter order", format!("{v}")));
    }
    Ok((l as usize).max(1))
}

fn check_width<T: Real>(delta_tilde: T) -> Result<()> {
    if !(delta_tilde > T::zero() && delta_tilde < T::one()) {
        return Err(Error::domain("filter width", format!("{delta_tilde} not in (0, 1)")));
    }
    Ok(())
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if !(eta > T::zero() && eta <= T::one()) {
        return Err(Error::domain("eta", format!("{eta} not in (0, 1]")));
    }
    Ok(())
}

impl<T: Real> FilterSpec<T> {
    pub fn new(kind: FilterKind, delta_tilde: T, eta: T) -> Result<Self> {
        let order = order_for(delta_tilde, eta)?;
        Ok(Self {
            kind,
            delta_tilde,
            eta,
            order,
            order_overridden: false,
            edge: EdgeValue::Exact,
        })
    }

    /// Filter with width `1/κ`, as used by the solver.
    pub fn for_kappa(kind: FilterKind, kappa: T, eta: T) -> Result<Self> {
        if !(kappa > T::one()) {
            return Err(Error::domain("kappa", format!("{kappa} must exceed 1")));
        }
        Self::new(kind, T::one() / kappa, eta)
    }

    /// Replaces the derived order.
    pub fn with_order(mut self, order: usize) -> Self {
        self.order_overridden = order != self.order || self.order_overridden;
        self.order = order;
        self
    }

    pub fn with_edge(mut self, edge: EdgeValue) -> Self {
        self.edge = edge;
        self
    }

    /// Polynomial degree `2l`, which is also the number of block-encoding calls.
    pub fn degree(&self) -> usize {
        2 * self.order
    }

    /// `arccosh(u(0)) = 2 artanh(Δ̃)`.
    fn edge_angle(&self) -> T {
        let d = self.delta_tilde;
        (T::lit(2.0) * d / (T::one() - d)).ln_1p()
    }

    /// `1/T_l(u(0))`, the true value of `F` at the filter edge `x = Δ̃`.
    pub fn edge_filter_value(&self) -> T {
        sech(T::from_usize_lossy(self.order) * self.edge_angle())
    }

    /// The value used for `F(Δ̃)` inside `K`, according to [`EdgeValue`].
    pub fn edge_value(&self) -> T {
        match self.edge {
            EdgeValue::Exact => self.edge_filter_value(),
            EdgeValue::Nominal => self.eta,
        }
    }

    /// Projection filter `F(x)`. Inputs are clamped to `[-1, 1]`.
    pub fn eval_f(&self, x: T) -> T {
        let x = x.abs().min(T::one());
        if x == T::zero() {
            return T::one();
        }
        let d = self.delta_tilde;
        let l = T::from_usize_lossy(self.order);
        let denom_arg = l * self.edge_angle();
        let scale = T::one() - d * d;
        if x <= d {
            // u(x) >= 1: ratio of cosh values.
            let du = T::lit(2.0) * (d - x) * (d + x) / scale;
            let num_arg = l * acosh_one_plus(du);
            cosh_ratio(num_arg, denom_arg)
        } else {
            // u(x) in [-1, 1): cos(l φ) with φ = arccos(u) = 2 asin(√((1-u)/2)).
            let half_gap = (x - d) * (x + d) / scale;
            let phi = T::lit(2.0) * half_gap.sqrt().min(T::one()).asin();
            (l * phi).cos() * sech(denom_arg)
        }
    }

    /// Reflection filter `K(x)`. Inputs are clamped to `[-1, 1]`.
    pub fn eval_k(&self, x: T) -> T {
        let e = self.edge_value();
        (T::lit(2.0) * self.eval_f(x) - T::one() + e) / (T::one() + e)
    }

    /// Evaluates the polynomial selected by `kind`.
    pub fn eval(&self, x: T) -> T {
        match self.kind {
            FilterKind::Projection => self.eval_f(x),
            FilterKind::Reflection => self.eval_k(x),
        }
    }
}

/// `arccosh(1 + d)` for `d >= 0`, accurate for small `d`.
fn acosh_one_plus<T: Real>(d: T) -> T {
    (d + (d * (d + T::lit(2.0))).sqrt()).ln_1p()
}

fn sech<T: Real>(a: T) -> T {
    if a > T::lit(LOG_SPACE_SWITCH) {
        let e = (-a).exp();
        T::lit(2.0) * e / (T::one() + e * e)
    } else {
        T::one() / a.cosh()
    }
}

/// `cosh(a) / cosh(b)` for `a, b >= 0`.
fn cosh_ratio<T: Real>(a: T, b: T) -> T {
    let switch = T::lit(LOG_SPACE_SWITCH);
    if a <= switch && b <= switch {
        a.cosh() / b.cosh()
    } else {
        let two = T::lit(2.0);
        (a - b).exp() * (T::one() + (-two * a).exp()) / (T::one() + (-two * b).exp())
    }
}

/// Chebyshev polynomial of the first kind, `T_l(y)`.
///
/// Uses `cos(l arccos y)` inside `[-1, 1]` and `±cosh(l arccosh |y|)` outside.
/// Fails when the result would overflow; use [`log_chebyshev_t`] there.
pub fn chebyshev_t<T: Real>(l: usize, y: T) -> Result<T> {
    if !y.is_finite() {
        return Err(Error::NonFinite("chebyshev argument"));
    }
    let lf = T::from_usize_lossy(l);
    if y.abs() <= T::one() {
        return Ok((lf * y.acos()).cos());
    }
    let arg = lf * acosh_one_plus(y.abs() - T::one());
    let v = arg.cosh();
    if !v.is_finite() {
        return Err(Error::domain(
            "chebyshev value",
            format!("T_{l}({y}) overflows; use log_chebyshev_t"),
        ));
    }
    let odd_negative = y < T::zero() && l % 2 == 1;
    Ok(if odd_negative { -v } else { v })
}

/// `ln T_l(y)` for `y >= 1`, finite for any order.
pub fn log_chebyshev_t<T: Real>(l: usize, y: T) -> Result<T> {
    if !(y >= T::one()) || !y.is_finite() {
        return Err(Error::domain("log chebyshev argument", format!("{y} < 1")));
    }
    let a = T::from_usize_lossy(l) * acosh_one_plus(y - T::one());
    // ln cosh a = a + ln(1 + e^{-2a}) - ln 2
    Ok(a + (-(a + a)).exp().ln_1p() - T::LN_2())
}
